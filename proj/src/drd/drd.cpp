#include "tspkit/drd.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tspkit::drd {

std::string to_string(TokenMode mode) { return mode == TokenMode::kClass ? "class" : "region"; }

TokenMode parse_token_mode(const std::string& text) {
  if (text == "region") return TokenMode::kRegion;
  if (text == "class") return TokenMode::kClass;
  throw std::invalid_argument("token mode must be 'region' or 'class', got '" + text + "'");
}

void DrdConfig::validate() const {
  if (num_tokens == 0 || num_heads == 0 || channels == 0 || num_classes == 0) {
    throw std::invalid_argument("decoder sizes must be positive");
  }
  if (channels % num_heads != 0) {
    throw std::invalid_argument("channels " + std::to_string(channels) +
                                " not divisible by heads " + std::to_string(num_heads));
  }
  if (channels < 2) throw std::invalid_argument("channels must be >= 2");
  if (aspp_dilations.empty()) throw std::invalid_argument("at least one ASPP branch required");
  if (std::any_of(aspp_dilations.begin(), aspp_dilations.end(),
                  [](std::size_t d) { return d == 0; })) {
    throw std::invalid_argument("ASPP dilations must be positive");
  }
  if (token_mode == TokenMode::kClass && num_tokens != num_classes) {
    throw std::invalid_argument("class tokens need one token per class (" +
                                std::to_string(num_classes) + "), got " +
                                std::to_string(num_tokens));
  }
}

DrdParams DrdParams::init(const DrdConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t c = config.channels;
  const std::size_t stem = std::max<std::size_t>(1, c / 2);
  DrdParams p;
  p.encoder.stage_x4 = Conv2d::init(3, stem, 3, rng, 4, 1);
  p.encoder.stage_x8 = Conv2d::init(stem, c, 3, rng, 2, 1);
  p.encoder.stage_x16 = Conv2d::init(c, c, 3, rng, 2, 1);

  for (std::size_t d : config.aspp_dilations) {
    p.fusion.aspp_branches.push_back(d == 1 ? Conv2d::init(c, c, 1, rng)
                                            : Conv2d::init(c, c, 3, rng, 1, d, d));
  }
  p.fusion.aspp_project = Conv2d::init(c * config.aspp_dilations.size(), c, 1, rng);
  p.fusion.low_level_project = Conv2d::init(c, c, 1, rng);
  p.fusion.fuse = Conv2d::init(2 * c, c, 3, rng, 1, 1);

  auto& r = p.refine;
  r.tokens = Tensor::randn({config.num_tokens, c}, rng, 0.02, true);
  r.query = Linear::init(c, c, rng);
  r.key = Linear::init(c, c, rng);
  r.value = Linear::init(c, c, rng);
  r.out = Linear::init(c, c, rng, /*with_bias=*/false);
  r.ffn_in = Linear::init(c, 4 * c, rng);
  r.ffn_out = Linear::init(4 * c, c, rng);
  r.map_query = Linear::init(c, c, rng);
  r.map_key = Linear::init(c, c, rng);

  if (config.token_mode == TokenMode::kClass) {
    p.final_proj = Conv2d::init(config.num_tokens * c, config.num_classes, 1, rng, 1, 0, 1,
                                config.num_classes);
  } else {
    p.final_proj = Conv2d::init(config.num_tokens * c, config.num_classes, 1, rng);
  }
  return p;
}

namespace {

void add_conv(NamedTensors& out, const std::string& name, const Conv2d& conv) {
  out.emplace_back(name + ".weight", conv.weight);
  if (conv.bias.defined()) out.emplace_back(name + ".bias", conv.bias);
}

void add_linear(NamedTensors& out, const std::string& name, const Linear& l) {
  out.emplace_back(name + ".weight", l.weight);
  if (l.bias.defined()) out.emplace_back(name + ".bias", l.bias);
}

Tensor fresh(const Tensor& t) { return t.defined() ? t.detach(true) : Tensor(); }

Conv2d clone_conv(const Conv2d& c) {
  Conv2d out = c;
  out.weight = fresh(c.weight);
  out.bias = fresh(c.bias);
  return out;
}

Linear clone_linear(const Linear& l) { return Linear{fresh(l.weight), fresh(l.bias)}; }

}  // namespace

NamedTensors DrdParams::named_parameters() const {
  NamedTensors out;
  add_conv(out, "encoder.stage_x4", encoder.stage_x4);
  add_conv(out, "encoder.stage_x8", encoder.stage_x8);
  add_conv(out, "encoder.stage_x16", encoder.stage_x16);
  for (std::size_t i = 0; i < fusion.aspp_branches.size(); ++i) {
    add_conv(out, "fusion.aspp." + std::to_string(i), fusion.aspp_branches[i]);
  }
  add_conv(out, "fusion.aspp_project", fusion.aspp_project);
  add_conv(out, "fusion.low_level_project", fusion.low_level_project);
  add_conv(out, "fusion.fuse", fusion.fuse);
  out.emplace_back("refine.tokens", refine.tokens);
  add_linear(out, "refine.query", refine.query);
  add_linear(out, "refine.key", refine.key);
  add_linear(out, "refine.value", refine.value);
  add_linear(out, "refine.out", refine.out);
  add_linear(out, "refine.ffn_in", refine.ffn_in);
  add_linear(out, "refine.ffn_out", refine.ffn_out);
  add_linear(out, "refine.map_query", refine.map_query);
  add_linear(out, "refine.map_key", refine.map_key);
  add_conv(out, "final_proj", final_proj);
  return out;
}

DrdParams DrdParams::clone() const {
  DrdParams p;
  p.encoder = {clone_conv(encoder.stage_x4), clone_conv(encoder.stage_x8),
               clone_conv(encoder.stage_x16)};
  for (const auto& b : fusion.aspp_branches) p.fusion.aspp_branches.push_back(clone_conv(b));
  p.fusion.aspp_project = clone_conv(fusion.aspp_project);
  p.fusion.low_level_project = clone_conv(fusion.low_level_project);
  p.fusion.fuse = clone_conv(fusion.fuse);
  p.refine.tokens = fresh(refine.tokens);
  p.refine.query = clone_linear(refine.query);
  p.refine.key = clone_linear(refine.key);
  p.refine.value = clone_linear(refine.value);
  p.refine.out = clone_linear(refine.out);
  p.refine.ffn_in = clone_linear(refine.ffn_in);
  p.refine.ffn_out = clone_linear(refine.ffn_out);
  p.refine.map_query = clone_linear(refine.map_query);
  p.refine.map_key = clone_linear(refine.map_key);
  p.final_proj = clone_conv(final_proj);
  return p;
}

EncoderFeatures stub_encoder_forward(const Tensor& image, const StubEncoderParams& params) {
  if (image.rank() != 4 || image.extent(1) != 3) {
    throw ShapeError("encoder expects [B,3,H,W] images, got " + shape_to_string(image.shape()));
  }
  if (image.extent(2) % 16 != 0 || image.extent(3) % 16 != 0) {
    throw ShapeError("image height and width must be divisible by 16, got " +
                     shape_to_string(image.shape()));
  }
  EncoderFeatures f;
  f.x4 = gelu(conv2d(image, params.stage_x4));
  f.x8 = gelu(conv2d(f.x4, params.stage_x8));
  f.x16 = gelu(conv2d(f.x8, params.stage_x16));
  return f;
}

Tensor fusion_forward(const Tensor& stage3, const Tensor& last, const FusionParams& params,
                      const DrdConfig& config) {
  if (stage3.rank() != 4 || last.rank() != 4 || stage3.extent(0) != last.extent(0) ||
      stage3.extent(2) != 2 * last.extent(2) || stage3.extent(3) != 2 * last.extent(3)) {
    throw ShapeError("fusion: x8 features " + shape_to_string(stage3.shape()) +
                     " and x16 features " + shape_to_string(last.shape()) +
                     " are not in an exact 2:1 spatial ratio");
  }
  if (params.aspp_branches.size() != config.aspp_dilations.size()) {
    throw ShapeError("fusion: parameter set does not match ASPP configuration");
  }
  std::vector<Tensor> branches;
  branches.reserve(params.aspp_branches.size());
  for (const Conv2d& b : params.aspp_branches) branches.push_back(gelu(conv2d(last, b)));
  Tensor context = gelu(conv2d(concat(branches, 1), params.aspp_project));
  Tensor upsampled = upsample_bilinear(context, stage3.extent(2), stage3.extent(3));
  Tensor low = gelu(conv2d(stage3, params.low_level_project));
  return gelu(conv2d(concat({upsampled, low}, 1), params.fuse));
}

namespace {

// [rows, heads*d] -> [heads, rows, d]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t rows = x.extent(0), d = x.extent(1) / heads;
  return permute(reshape(x, {rows, heads, d}), {1, 0, 2});
}

}  // namespace

RegionRefineOutput region_refine_forward(const Tensor& features, const Tensor& tokens,
                                         const RegionRefineParams& params,
                                         const DrdConfig& config) {
  const std::size_t c = config.channels;
  const std::size_t n = config.num_tokens;
  if (features.rank() != 2 || features.extent(1) != c) {
    throw ShapeError("region refine: features must be [HW, " + std::to_string(c) + "], got " +
                     shape_to_string(features.shape()));
  }
  if (tokens.rank() != 2 || tokens.extent(0) != n || tokens.extent(1) != c) {
    throw ShapeError("region refine: tokens must be [" + std::to_string(n) + ", " +
                     std::to_string(c) + "], got " + shape_to_string(tokens.shape()));
  }
  const std::size_t heads = config.num_heads;

  // Token update: multi-head cross-attention of tokens over features.
  Tensor rq = split_heads(linear(tokens, params.query), heads);    // [h, N, d]
  Tensor fk = split_heads(linear(features, params.key), heads);    // [h, HW, d]
  Tensor fv = split_heads(linear(features, params.value), heads);  // [h, HW, d]
  const double token_scale =
      1.0 / std::sqrt(static_cast<double>(config.literal_sqrt_c_scaling ? c : config.head_dim()));
  Tensor token_attention = softmax_lastdim(scale(matmul(rq, transpose(fk)), token_scale));
  Tensor context = reshape(permute(matmul(token_attention, fv), {1, 0, 2}), {n, c});
  Tensor r_e = add(linear(context, params.out), tokens);

  Tensor r_o = add(linear(gelu(linear(r_e, params.ffn_in)), params.ffn_out), r_e);

  // One single-head map per token.
  Tensor rq1 = linear(r_o, params.map_query);
  Tensor fk1 = linear(features, params.map_key);
  Tensor a = softmax_lastdim(
      scale(matmul(rq1, transpose(fk1)), 1.0 / std::sqrt(static_cast<double>(c))));
  return {broadcast_token_product(a, features), a, r_o, r_e, token_attention};
}

DrdOutput drd_forward(const Tensor& image, const DrdParams& params, const DrdConfig& config) {
  config.validate();
  EncoderFeatures enc = stub_encoder_forward(image, params.encoder);
  Tensor fused = fusion_forward(enc.x8, enc.x16, params.fusion, config);
  const std::size_t batch = fused.extent(0), c = fused.extent(1);
  const std::size_t h = fused.extent(2), w = fused.extent(3);
  const std::size_t n = config.num_tokens;

  DrdOutput out;
  out.feature_h = h;
  out.feature_w = w;
  std::vector<Tensor> per_item;
  per_item.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor item = reshape(slice(fused, 0, b, 1), {c, h * w});
    Tensor features = transpose(item);  // [HW, C]
    RegionRefineOutput r = region_refine_forward(features, params.refine.tokens, params.refine,
                                                 config);
    // [N, HW, C] -> [N, C, HW] -> [1, N*C, h, w], token-major channels.
    per_item.push_back(reshape(permute(r.S, {0, 2, 1}), {1, n * c, h, w}));
    out.refine.push_back(std::move(r));
  }
  Tensor stacked = batch == 1 ? per_item.front() : concat(per_item, 0);
  out.logits = conv2d(stacked, params.final_proj);
  return out;
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const std::uint8_t> target) {
  return cross_entropy(logits, target);
}

}  // namespace tspkit::drd
