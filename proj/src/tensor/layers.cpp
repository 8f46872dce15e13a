#include "tspkit/layers.hpp"

#include <algorithm>
#include <cmath>

namespace tspkit {

using detail::Node;

Linear Linear::init(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias) {
  Linear l;
  l.weight = Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true);
  if (with_bias) l.bias = Tensor::zeros({out}, true);
  return l;
}

Tensor linear(const Tensor& x, const Linear& layer) {
  const Shape& s = x.shape();
  if (s.back() != layer.in_features()) {
    throw ShapeError("linear: input " + shape_to_string(s) + " does not match weight " +
                     shape_to_string(layer.weight.shape()));
  }
  const std::size_t rows = x.numel() / s.back();
  Tensor y = matmul(s.size() == 2 ? x : reshape(x, {rows, s.back()}), layer.weight);
  if (layer.bias.defined()) y = add_lastdim(y, layer.bias);
  if (s.size() == 2) return y;
  Shape out = s;
  out.back() = layer.out_features();
  return reshape(y, out);
}

Conv2d Conv2d::init(std::size_t in, std::size_t out, std::size_t kernel, std::mt19937_64& rng,
                    std::size_t stride, std::size_t padding, std::size_t dilation,
                    std::size_t groups, bool with_bias) {
  if (groups == 0 || in % groups != 0 || out % groups != 0) {
    throw ShapeError("conv2d: channels " + std::to_string(in) + "->" + std::to_string(out) +
                     " not divisible by groups " + std::to_string(groups));
  }
  Conv2d c;
  const double fan_in = static_cast<double>(in / groups * kernel * kernel);
  c.weight = Tensor::randn({out, in / groups, kernel, kernel}, rng, std::sqrt(2.0 / fan_in), true);
  if (with_bias) c.bias = Tensor::zeros({out}, true);
  c.stride = stride;
  c.padding = padding;
  c.dilation = dilation;
  c.groups = groups;
  return c;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding, std::size_t dilation) {
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (stride == 0 || in + 2 * padding < span) {
    throw ShapeError("conv2d: input extent " + std::to_string(in) + " too small for kernel " +
                     std::to_string(kernel) + " with dilation " + std::to_string(dilation) +
                     " and padding " + std::to_string(padding));
  }
  return (in + 2 * padding - span) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t batch, cin, cout, groups, cin_g, cout_g, k;
  std::size_t h, w, oh, ow;
  long stride, pad, dil;

  // Output columns whose input column (ow*stride - pad + kw*dil) lies in [0, w).
  std::pair<std::size_t, std::size_t> valid_range(std::size_t kpos, std::size_t extent,
                                                  std::size_t out_extent) const {
    const long offset = static_cast<long>(kpos) * dil - pad;
    long lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    long hi = (static_cast<long>(extent) - offset + stride - 1) / stride;
    lo = std::clamp(lo, 0L, static_cast<long>(out_extent));
    hi = std::clamp(hi, lo, static_cast<long>(out_extent));
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }
};

}  // namespace

Tensor conv2d(const Tensor& x, const Conv2d& layer) {
  if (x.rank() != 4) {
    throw ShapeError("conv2d expects [B,C,H,W] input, got " + shape_to_string(x.shape()));
  }
  const Shape& ws = layer.weight.shape();
  if (ws.size() != 4 || ws[2] != ws[3]) {
    throw ShapeError("conv2d: weight must be [C_out, C_in/groups, k, k], got " +
                     shape_to_string(ws));
  }
  if (layer.groups == 0 || ws[0] % layer.groups != 0) {
    throw ShapeError("conv2d: output channels " + std::to_string(ws[0]) +
                     " not divisible by groups " + std::to_string(layer.groups));
  }
  if (x.extent(1) != layer.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.extent(1)) +
                     " channels, layer expects " + std::to_string(layer.in_channels()));
  }
  if (layer.bias.defined() && (layer.bias.rank() != 1 || layer.bias.extent(0) != ws[0])) {
    throw ShapeError("conv2d: bias shape " + shape_to_string(layer.bias.shape()));
  }
  ConvGeometry g{};
  g.batch = x.extent(0);
  g.cin = x.extent(1);
  g.cout = ws[0];
  g.groups = layer.groups;
  g.cin_g = ws[1];
  g.cout_g = g.cout / g.groups;
  g.k = ws[2];
  g.h = x.extent(2);
  g.w = x.extent(3);
  g.oh = conv_output_extent(g.h, g.k, layer.stride, layer.padding, layer.dilation);
  g.ow = conv_output_extent(g.w, g.k, layer.stride, layer.padding, layer.dilation);
  g.stride = static_cast<long>(layer.stride);
  g.pad = static_cast<long>(layer.padding);
  g.dil = static_cast<long>(layer.dilation);

  auto xv = x.data();
  auto wv = layer.weight.data();
  std::vector<double> out(g.batch * g.cout * g.oh * g.ow, 0.0);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.cout; ++oc) {
      double* o = out.data() + (b * g.cout + oc) * g.oh * g.ow;
      if (layer.bias.defined()) std::fill_n(o, g.oh * g.ow, layer.bias.data()[oc]);
      const std::size_t grp = oc / g.cout_g;
      for (std::size_t icg = 0; icg < g.cin_g; ++icg) {
        const std::size_t ic = grp * g.cin_g + icg;
        const double* in = xv.data() + (b * g.cin + ic) * g.h * g.w;
        const double* wk = wv.data() + (oc * g.cin_g + icg) * g.k * g.k;
        for (std::size_t kh = 0; kh < g.k; ++kh) {
          auto [y0, y1] = g.valid_range(kh, g.h, g.oh);
          for (std::size_t kw = 0; kw < g.k; ++kw) {
            auto [x0, x1] = g.valid_range(kw, g.w, g.ow);
            const double wt = wk[kh * g.k + kw];
            for (std::size_t oy = y0; oy < y1; ++oy) {
              const std::size_t iy = oy * g.stride - g.pad + kh * g.dil;
              const double* row = in + iy * g.w;
              double* orow = o + oy * g.ow;
              for (std::size_t ox = x0; ox < x1; ++ox) {
                orow[ox] += wt * row[ox * g.stride - g.pad + kw * g.dil];
              }
            }
          }
        }
      }
    }
  }

  std::vector<Tensor> parents{x, layer.weight};
  const bool has_bias = layer.bias.defined();
  if (has_bias) parents.push_back(layer.bias);
  Shape out_shape{g.batch, g.cout, g.oh, g.ow};
  return Tensor::make_result(
      std::move(out_shape), std::move(out), "conv2d", std::move(parents),
      [g, has_bias](Node& self) {
        const auto& xd = self.parents[0]->data;
        const auto& wd = self.parents[1]->data;
        std::vector<double>* gx =
            self.parents[0]->requires_grad ? &self.parents[0]->ensure_grad() : nullptr;
        std::vector<double>* gw =
            self.parents[1]->requires_grad ? &self.parents[1]->ensure_grad() : nullptr;
        if (has_bias && self.parents[2]->requires_grad) {
          auto& gb = self.parents[2]->ensure_grad();
          for (std::size_t b = 0; b < g.batch; ++b) {
            for (std::size_t oc = 0; oc < g.cout; ++oc) {
              const double* go = self.grad.data() + (b * g.cout + oc) * g.oh * g.ow;
              double acc = 0.0;
              for (std::size_t i = 0; i < g.oh * g.ow; ++i) acc += go[i];
              gb[oc] += acc;
            }
          }
        }
        if (!gx && !gw) return;
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t oc = 0; oc < g.cout; ++oc) {
            const double* go = self.grad.data() + (b * g.cout + oc) * g.oh * g.ow;
            const std::size_t grp = oc / g.cout_g;
            for (std::size_t icg = 0; icg < g.cin_g; ++icg) {
              const std::size_t ic = grp * g.cin_g + icg;
              const std::size_t in_off = (b * g.cin + ic) * g.h * g.w;
              const std::size_t w_off = (oc * g.cin_g + icg) * g.k * g.k;
              for (std::size_t kh = 0; kh < g.k; ++kh) {
                auto [y0, y1] = g.valid_range(kh, g.h, g.oh);
                for (std::size_t kw = 0; kw < g.k; ++kw) {
                  auto [x0, x1] = g.valid_range(kw, g.w, g.ow);
                  const double wt = wd[w_off + kh * g.k + kw];
                  double wacc = 0.0;
                  for (std::size_t oy = y0; oy < y1; ++oy) {
                    const std::size_t iy = oy * g.stride - g.pad + kh * g.dil;
                    const std::size_t row = in_off + iy * g.w;
                    const double* grow = go + oy * g.ow;
                    for (std::size_t ox = x0; ox < x1; ++ox) {
                      const std::size_t ix = ox * g.stride - g.pad + kw * g.dil;
                      if (gx) (*gx)[row + ix] += wt * grow[ox];
                      wacc += xd[row + ix] * grow[ox];
                    }
                  }
                  if (gw) (*gw)[w_off + kh * g.k + kw] += wacc;
                }
              }
            }
          }
        }
      });
}

}  // namespace tspkit
