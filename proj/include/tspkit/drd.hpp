#pragma once

// Detail refining decoder: DeepLabv3+-style fusion of x8/x16 encoder features
// followed by the region refining module (learnable region tokens attending
// over the fused features, one attention map per token, broadcast
// combination, and a final 1x1 projection to class logits).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tspkit/layers.hpp"
#include "tspkit/serialize.hpp"
#include "tspkit/tensor.hpp"

namespace tspkit::drd {

enum class TokenMode { kRegion, kClass };

std::string to_string(TokenMode mode);
TokenMode parse_token_mode(const std::string& text);

struct DrdConfig {
  std::size_t num_tokens = 5;
  std::size_t num_heads = 12;
  std::size_t channels = 36;
  std::size_t num_classes = 21;
  std::vector<std::size_t> aspp_dilations{1, 6, 12, 18};
  TokenMode token_mode = TokenMode::kRegion;
  // Scale token/feature attention by 1/sqrt(C) instead of 1/sqrt(C/heads).
  bool literal_sqrt_c_scaling = false;

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  std::size_t head_dim() const { return channels / num_heads; }
};

struct StubEncoderParams {
  Conv2d stage_x4;   // 3 -> C/2, stride 4
  Conv2d stage_x8;   // C/2 -> C, stride 2
  Conv2d stage_x16;  // C -> C, stride 2
};

struct FusionParams {
  std::vector<Conv2d> aspp_branches;  // dilation 1 -> 1x1 conv, else dilated 3x3
  Conv2d aspp_project;                // (branches * C) -> C, 1x1
  Conv2d low_level_project;           // C -> C, 1x1 on x8 features
  Conv2d fuse;                        // 2C -> C, 3x3
};

struct RegionRefineParams {
  Tensor tokens;  // [N, C]
  Linear query, key, value;
  Linear out;  // head merge, no bias
  Linear ffn_in, ffn_out;
  Linear map_query, map_key;
};

struct DrdParams {
  StubEncoderParams encoder;
  FusionParams fusion;
  RegionRefineParams refine;
  Conv2d final_proj;

  static DrdParams init(const DrdConfig& config, std::uint64_t seed);

  // Stable names, shared handles: updating these updates the model.
  NamedTensors named_parameters() const;
  // Fresh leaves with the same values; the copy shares no storage.
  DrdParams clone() const;
};

struct EncoderFeatures {
  Tensor x4, x8, x16;
};

EncoderFeatures stub_encoder_forward(const Tensor& image, const StubEncoderParams& params);

// stage3 is the x8 feature map, last the x16 map; returns fused x8 features.
Tensor fusion_forward(const Tensor& stage3, const Tensor& last, const FusionParams& params,
                      const DrdConfig& config);

struct RegionRefineOutput {
  Tensor S;                // [N, HW, C]
  Tensor A;                // [N, HW]
  Tensor R_O;              // [N, C]
  Tensor R_E;              // [N, C]
  Tensor token_attention;  // [heads, N, HW], softmax rows of the token update
};

// features is [HW, C] and tokens is [N, C].
RegionRefineOutput region_refine_forward(const Tensor& features, const Tensor& tokens,
                                         const RegionRefineParams& params,
                                         const DrdConfig& config);

struct DrdOutput {
  Tensor logits;  // [B, K, H/8, W/8]
  std::vector<RegionRefineOutput> refine;
  std::size_t feature_h = 0;
  std::size_t feature_w = 0;
};

DrdOutput drd_forward(const Tensor& image, const DrdParams& params, const DrdConfig& config);

// Mean cross entropy of [B,K,h,w] logits against labels already at h x w.
Tensor cross_entropy_loss(const Tensor& logits, std::span<const std::uint8_t> target);

}  // namespace tspkit::drd
