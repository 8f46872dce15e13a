#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tspkit/annotation.hpp"
#include "tspkit/registry.hpp"

namespace tspkit {

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::size_t width = 64;
  std::size_t height = 64;
  // Exact number of traffic participants placed in every image.
  std::size_t participants_per_image = 4;
  std::size_t min_size = 4;
  std::size_t max_size = 12;
  std::size_t max_attempts = 500;  // per participant
  std::size_t scenes = 4;
  int noise = 12;  // uniform RGB noise amplitude
  Split split = Split::kTrain;
  std::string id_prefix = "synthetic";
};

// One placed participant rectangle; the ground truth the generator promises.
struct Placement {
  std::string image_id;
  std::uint8_t class_id = 0;
  std::uint32_t instance_index = 0;
  std::size_t x = 0, y = 0, w = 0, h = 0;
};

struct SyntheticSet {
  std::vector<AnnotatedImage> images;
  std::vector<Placement> ledger;
};

// Deterministic scenes: stuff above, a road band, stuff below, and
// non-overlapping axis-aligned participant rectangles. Throws
// std::runtime_error when a participant cannot be placed.
SyntheticSet generate_synthetic(const ClassRegistry& registry, const SyntheticOptions& options);

// Nominal RGB color of a class (Cityscapes palette for known names).
std::array<std::uint8_t, 3> class_color(const ClassInfo& info);

}  // namespace tspkit
