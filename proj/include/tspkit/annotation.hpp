#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tspkit/registry.hpp"

namespace tspkit {

inline constexpr std::uint8_t kIgnoreClass = 255;
inline constexpr std::uint32_t kInstanceIdFactor = 1000;
inline constexpr std::uint32_t kMaxInstancesPerClass = 999;

// H x W semantic class ids, row-major. 255 marks ignored pixels.
struct LabelMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  LabelMap() = default;
  LabelMap(std::size_t w, std::size_t h, std::uint8_t fill = kIgnoreClass)
      : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  bool operator==(const LabelMap&) const = default;
};

// H x W encoded instance ids: class * 1000 + index for instance pixels,
// the bare class id for stuff pixels, 255 for ignored pixels.
struct InstanceMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint32_t> pixels;

  InstanceMap() = default;
  InstanceMap(std::size_t w, std::size_t h, std::uint32_t fill = kIgnoreClass)
      : width(w), height(h), pixels(w * h, fill) {}

  std::uint32_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::uint32_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  bool operator==(const InstanceMap&) const = default;
};

// Interleaved 8-bit RGB.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  bool operator==(const RgbImage&) const = default;
};

enum class Split { kTrain, kVal, kTest };
enum class Weather { kSunny, kCloudy, kRain, kFog, kSnow };

std::string to_string(Split split);
std::string to_string(Weather weather);
Split parse_split(const std::string& text);
Weather parse_weather(const std::string& text);

struct AnnotatedImage {
  std::string image_id;
  RgbImage image;
  LabelMap label;
  InstanceMap instances;
  Split split = Split::kTrain;
  std::string scene_id;
  Weather weather = Weather::kSunny;

  bool operator==(const AnnotatedImage&) const = default;
};

struct DecodedInstance {
  std::uint32_t class_id = 0;
  std::uint32_t instance_index = 0;
  bool operator==(const DecodedInstance&) const = default;
};

std::uint32_t encode_instance_id(std::uint32_t class_id, std::uint32_t instance_index);
// Plain arithmetic split: (id / 1000, id % 1000) for id >= 1000, else (id, 0).
DecodedInstance split_instance_id(std::uint32_t id);
// split_instance_id plus registry validation; 255 decodes to the ignore class
// without error. Throws std::invalid_argument on an invalid class or on an
// instance index attached to a stuff class.
DecodedInstance decode_instance_id(std::uint32_t id, const ClassRegistry& registry);

struct PairIssue {
  enum class Kind { kClassMismatch, kInstanceOnStuff, kInvalidClass };
  Kind kind;
  std::size_t x = 0;
  std::size_t y = 0;
  std::uint32_t label_class = 0;
  std::uint32_t instance_id = 0;
};

std::string to_string(PairIssue::Kind kind);

struct PairReport {
  std::vector<PairIssue> issues;  // first kMaxListedIssues, in scan order
  std::size_t total_issues = 0;
  std::map<std::uint32_t, std::size_t> instances_per_class;

  static constexpr std::size_t kMaxListedIssues = 100;
  bool empty() const { return total_issues == 0; }
};

// Cross-checks a semantic/instance pair. Extent mismatches and empty maps
// throw; content problems are reported.
PairReport validate_pair(const LabelMap& label, const InstanceMap& instances,
                         const ClassRegistry& registry);

}  // namespace tspkit
