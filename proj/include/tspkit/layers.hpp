#pragma once

#include <cstddef>
#include <random>

#include "tspkit/tensor.hpp"

namespace tspkit {

// y = x W + b over the last dim. weight is [in, out]; bias is [out] or undefined.
struct Linear {
  Tensor weight;
  Tensor bias;

  std::size_t in_features() const { return weight.extent(0); }
  std::size_t out_features() const { return weight.extent(1); }

  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng,
                     bool with_bias = true);
};

Tensor linear(const Tensor& x, const Linear& layer);

// weight is [C_out, C_in / groups, k, k]; bias is [C_out] or undefined.
struct Conv2d {
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  std::size_t groups = 1;

  std::size_t out_channels() const { return weight.extent(0); }
  std::size_t in_channels() const { return weight.extent(1) * groups; }
  std::size_t kernel() const { return weight.extent(2); }

  static Conv2d init(std::size_t in, std::size_t out, std::size_t kernel, std::mt19937_64& rng,
                     std::size_t stride = 1, std::size_t padding = 0, std::size_t dilation = 1,
                     std::size_t groups = 1, bool with_bias = true);
};

// Output extent of a convolution along one spatial axis; throws ShapeError if
// the dilated kernel does not fit.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding, std::size_t dilation);

// x is [B, C_in, H, W].
Tensor conv2d(const Tensor& x, const Conv2d& layer);

}  // namespace tspkit
