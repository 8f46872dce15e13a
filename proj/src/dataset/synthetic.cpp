#include "tspkit/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <stdexcept>

namespace tspkit {

namespace {

// Portable draws; std:: distributions differ between standard libraries.
std::size_t draw_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

std::size_t draw_between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + draw_index(rng, hi - lo + 1);
}

double draw_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double participant_weight(const std::string& name) {
  static const std::map<std::string, double> weights{
      {"car", 6.0},  {"person", 3.0},     {"truck", 1.0},   {"bus", 1.0},
      {"rider", 1.0}, {"motorcycle", 1.5}, {"bicycle", 1.0},
  };
  auto it = weights.find(name);
  return it == weights.end() ? 1.0 : it->second;
}

}  // namespace

std::array<std::uint8_t, 3> class_color(const ClassInfo& info) {
  static const std::map<std::string, std::array<std::uint8_t, 3>> palette{
      {"road", {128, 64, 128}},       {"sidewalk", {244, 35, 232}},
      {"building", {70, 70, 70}},     {"wall", {102, 102, 156}},
      {"fence", {190, 153, 153}},     {"pole", {153, 153, 153}},
      {"traffic light", {250, 170, 30}}, {"traffic sign", {220, 220, 0}},
      {"vegetation", {107, 142, 35}}, {"terrain", {152, 251, 152}},
      {"sky", {70, 130, 180}},        {"person", {220, 20, 60}},
      {"rider", {255, 0, 0}},         {"car", {0, 0, 142}},
      {"truck", {0, 0, 70}},          {"bus", {0, 60, 100}},
      {"crosswalk", {255, 255, 255}}, {"driving indication", {200, 200, 120}},
      {"lane", {230, 230, 230}},      {"motorcycle", {0, 0, 230}},
      {"bicycle", {119, 11, 32}},     {"background", {70, 70, 70}},
  };
  auto it = palette.find(info.name);
  if (it != palette.end()) return it->second;
  const std::uint32_t h = (info.id + 1u) * 2654435761u;
  return {static_cast<std::uint8_t>(h >> 24), static_cast<std::uint8_t>(h >> 16),
          static_cast<std::uint8_t>(h >> 8)};
}

SyntheticSet generate_synthetic(const ClassRegistry& registry, const SyntheticOptions& opt) {
  if (opt.width < 8 || opt.height < 8) throw std::invalid_argument("synthetic images must be >= 8x8");
  if (opt.min_size == 0 || opt.min_size > opt.max_size) {
    throw std::invalid_argument("synthetic participant size range is empty");
  }
  const std::vector<std::uint8_t> participants = registry.participant_classes();
  if (opt.participants_per_image > 0 && participants.empty()) {
    throw std::invalid_argument("registry has no traffic-participant classes to place");
  }
  std::vector<std::uint8_t> stuff;
  for (const ClassInfo& c : registry.classes()) {
    if (!c.is_road && !c.has_instances) stuff.push_back(c.id);
  }
  const auto road = registry.road_class();
  std::vector<double> cumulative;
  double total_weight = 0.0;
  for (std::uint8_t c : participants) {
    total_weight += participant_weight(registry.at(c).name);
    cumulative.push_back(total_weight);
  }
  const std::size_t max_w = std::min(opt.max_size, opt.width);
  const std::size_t max_h = std::min(opt.max_size, opt.height);
  const std::size_t min_w = std::min(opt.min_size, max_w);
  const std::size_t min_h = std::min(opt.min_size, max_h);

  std::mt19937_64 rng(opt.seed);
  SyntheticSet out;
  out.images.reserve(opt.count);
  for (std::size_t n = 0; n < opt.count; ++n) {
    AnnotatedImage a;
    char id[32];
    std::snprintf(id, sizeof id, "_%05zu", n);
    a.image_id = opt.id_prefix + id;
    a.split = opt.split;
    a.scene_id = "scene_" + std::to_string(draw_index(rng, std::max<std::size_t>(1, opt.scenes)));
    a.weather = static_cast<Weather>(draw_index(rng, 5));
    const std::size_t w = opt.width, h = opt.height;
    a.label = LabelMap(w, h, 0);

    // Stuff layout: stripes above the road band, one class below it.
    const std::size_t road_top = road ? h * (30 + draw_index(rng, 16)) / 100 : h;
    const std::size_t road_bottom = road ? h * (75 + draw_index(rng, 16)) / 100 : h;
    const std::uint8_t fallback = road ? *road : 0;
    std::vector<std::uint8_t> stripes;
    const std::size_t stripe_count = stuff.empty() ? 1 : 1 + draw_index(rng, 3);
    for (std::size_t s = 0; s < stripe_count; ++s) {
      stripes.push_back(stuff.empty() ? fallback : stuff[draw_index(rng, stuff.size())]);
    }
    const std::uint8_t below = stuff.empty() ? fallback : stuff[draw_index(rng, stuff.size())];
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        std::uint8_t c;
        if (y < road_top) {
          c = stripes[x * stripes.size() / w];
        } else if (y < road_bottom) {
          c = fallback;
        } else {
          c = below;
        }
        a.label.at(x, y) = c;
      }
    }
    a.instances = InstanceMap(w, h);
    for (std::size_t i = 0; i < a.label.pixels.size(); ++i) a.instances.pixels[i] = a.label.pixels[i];

    std::vector<bool> occupied(w * h, false);
    std::map<std::uint8_t, std::uint32_t> next_index;
    for (std::size_t p = 0; p < opt.participants_per_image; ++p) {
      const double pick = draw_unit(rng) * total_weight;
      const std::size_t k = std::min<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
          participants.size() - 1);
      const std::uint8_t cls = participants[k];
      const std::uint32_t index = ++next_index[cls];
      if (index > kMaxInstancesPerClass) {
        throw std::runtime_error("more than 999 instances of one class requested per image");
      }
      bool placed = false;
      for (std::size_t attempt = 0; attempt < opt.max_attempts && !placed; ++attempt) {
        const std::size_t rw = draw_between(rng, min_w, max_w);
        const std::size_t rh = draw_between(rng, min_h, max_h);
        const std::size_t rx = draw_index(rng, w - rw + 1);
        const std::size_t ry = draw_index(rng, h - rh + 1);
        bool free = true;
        for (std::size_t y = ry; y < ry + rh && free; ++y) {
          for (std::size_t x = rx; x < rx + rw; ++x) {
            if (occupied[y * w + x]) {
              free = false;
              break;
            }
          }
        }
        if (!free) continue;
        const std::uint32_t encoded = encode_instance_id(cls, index);
        for (std::size_t y = ry; y < ry + rh; ++y) {
          for (std::size_t x = rx; x < rx + rw; ++x) {
            occupied[y * w + x] = true;
            a.label.at(x, y) = cls;
            a.instances.at(x, y) = encoded;
          }
        }
        out.ledger.push_back({a.image_id, cls, index, rx, ry, rw, rh});
        placed = true;
      }
      if (!placed) {
        throw std::runtime_error("could not place participant " + std::to_string(p + 1) + " of " +
                                 std::to_string(opt.participants_per_image) + " in " +
                                 a.image_id + " after " + std::to_string(opt.max_attempts) +
                                 " attempts");
      }
    }

    a.image.width = w;
    a.image.height = h;
    a.image.pixels.resize(w * h * 3);
    const int noise = std::max(0, opt.noise);
    for (std::size_t i = 0; i < w * h; ++i) {
      const auto color = class_color(registry.at(a.label.pixels[i]));
      for (int ch = 0; ch < 3; ++ch) {
        const int jitter =
            noise ? static_cast<int>(draw_index(rng, 2 * noise + 1)) - noise : 0;
        a.image.pixels[3 * i + ch] =
            static_cast<std::uint8_t>(std::clamp(int{color[ch]} + jitter, 0, 255));
      }
    }
    out.images.push_back(std::move(a));
  }
  return out;
}

}  // namespace tspkit
