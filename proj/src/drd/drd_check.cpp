#include "tspkit/drd_check.hpp"

#include <random>

namespace tspkit::drd {

namespace {

void add_conv(std::vector<std::pair<std::string, Tensor>>& in, const std::string& name,
              const Conv2d& c) {
  in.emplace_back(name + ".weight", c.weight);
  if (c.bias.defined()) in.emplace_back(name + ".bias", c.bias);
}

}  // namespace

std::vector<DrdGradCheck> check_drd_gradients(const DrdConfig& config, std::uint64_t seed,
                                              std::size_t image_size,
                                              const GradCheckOptions& options) {
  config.validate();
  std::mt19937_64 rng(seed);
  const DrdParams params = DrdParams::init(config, seed);
  const std::size_t c = config.channels;
  const std::size_t s8 = image_size / 8, s16 = image_size / 16;
  std::vector<DrdGradCheck> out;

  {
    Tensor stage3 = Tensor::randn({1, c, s8, s8}, rng, 1.0, true);
    Tensor last = Tensor::randn({1, c, s16, s16}, rng, 1.0, true);
    std::vector<std::pair<std::string, Tensor>> in{{"stage3", stage3}, {"last", last}};
    for (std::size_t i = 0; i < params.fusion.aspp_branches.size(); ++i) {
      add_conv(in, "aspp." + std::to_string(i), params.fusion.aspp_branches[i]);
    }
    add_conv(in, "aspp_project", params.fusion.aspp_project);
    add_conv(in, "low_level_project", params.fusion.low_level_project);
    add_conv(in, "fuse", params.fusion.fuse);
    out.push_back({"fusion", grad_check([&] {
                     return fusion_forward(stage3, last, params.fusion, config);
                   }, in, options)});
  }
  {
    Tensor features = Tensor::randn({s8 * s8, c}, rng, 1.0, true);
    std::vector<std::pair<std::string, Tensor>> in{{"features", features}};
    for (const auto& [name, t] : params.named_parameters()) {
      if (name.rfind("refine.", 0) == 0) in.emplace_back(name, t);
    }
    out.push_back({"region_refine", grad_check([&] {
                     RegionRefineOutput r =
                         region_refine_forward(features, params.refine.tokens, params.refine,
                                               config);
                     return concat({reshape(r.S, {r.S.numel()}), reshape(r.A, {r.A.numel()}),
                                    reshape(r.R_O, {r.R_O.numel()})},
                                   0);
                   }, in, options)});
  }
  {
    Tensor image = Tensor::randn({1, 3, image_size, image_size}, rng, 1.0, true);
    std::vector<std::pair<std::string, Tensor>> in{{"image", image}};
    for (const auto& [name, t] : params.named_parameters()) in.emplace_back(name, t);
    out.push_back({"end_to_end", grad_check([&] {
                     return drd_forward(image, params, config).logits;
                   }, in, options)});
  }
  return out;
}

}  // namespace tspkit::drd
