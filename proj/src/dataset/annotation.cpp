#include "tspkit/annotation.hpp"

#include <set>
#include <stdexcept>
#include <utility>

namespace tspkit {

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::string to_string(Weather weather) {
  switch (weather) {
    case Weather::kSunny: return "sunny";
    case Weather::kCloudy: return "cloudy";
    case Weather::kRain: return "rain";
    case Weather::kFog: return "fog";
    case Weather::kSnow: return "snow";
  }
  return "sunny";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + text + "'");
}

Weather parse_weather(const std::string& text) {
  for (Weather w : {Weather::kSunny, Weather::kCloudy, Weather::kRain, Weather::kFog,
                    Weather::kSnow}) {
    if (to_string(w) == text) return w;
  }
  throw std::invalid_argument("unknown weather tag '" + text + "'");
}

std::string to_string(PairIssue::Kind kind) {
  switch (kind) {
    case PairIssue::Kind::kClassMismatch: return "class_mismatch";
    case PairIssue::Kind::kInstanceOnStuff: return "instance_on_stuff";
    case PairIssue::Kind::kInvalidClass: return "invalid_class";
  }
  return "unknown";
}

std::uint32_t encode_instance_id(std::uint32_t class_id, std::uint32_t instance_index) {
  if (instance_index > kMaxInstancesPerClass) {
    throw std::invalid_argument("instance index " + std::to_string(instance_index) +
                                " exceeds the per-class limit of 999");
  }
  if (instance_index == 0) return class_id;
  return class_id * kInstanceIdFactor + instance_index;
}

DecodedInstance split_instance_id(std::uint32_t id) {
  if (id >= kInstanceIdFactor) return {id / kInstanceIdFactor, id % kInstanceIdFactor};
  return {id, 0};
}

DecodedInstance decode_instance_id(std::uint32_t id, const ClassRegistry& registry) {
  if (id == kIgnoreClass) return {kIgnoreClass, 0};
  DecodedInstance d = split_instance_id(id);
  if (!registry.contains(d.class_id)) {
    throw std::invalid_argument("instance id " + std::to_string(id) + " decodes to class " +
                                std::to_string(d.class_id) + ", not in registry");
  }
  if (d.instance_index > 0 && !registry.at(d.class_id).has_instances) {
    throw std::invalid_argument("instance id " + std::to_string(id) + " carries an index on " +
                                "stuff class '" + registry.at(d.class_id).name + "'");
  }
  return d;
}

PairReport validate_pair(const LabelMap& label, const InstanceMap& instances,
                         const ClassRegistry& registry) {
  if (label.width == 0 || label.height == 0) {
    throw std::invalid_argument("validate_pair: empty label map");
  }
  if (label.width != instances.width || label.height != instances.height) {
    throw std::invalid_argument("validate_pair: label map is " + std::to_string(label.width) +
                                "x" + std::to_string(label.height) + " but instance map is " +
                                std::to_string(instances.width) + "x" +
                                std::to_string(instances.height));
  }
  if (label.pixels.size() != label.width * label.height ||
      instances.pixels.size() != instances.width * instances.height) {
    throw std::invalid_argument("validate_pair: pixel buffer does not match extents");
  }
  PairReport report;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  auto flag = [&](PairIssue::Kind kind, std::size_t x, std::size_t y, std::uint32_t lc,
                  std::uint32_t id) {
    ++report.total_issues;
    if (report.issues.size() < PairReport::kMaxListedIssues) {
      report.issues.push_back({kind, x, y, lc, id});
    }
  };
  for (std::size_t y = 0; y < label.height; ++y) {
    for (std::size_t x = 0; x < label.width; ++x) {
      const std::uint8_t lc = label.at(x, y);
      const std::uint32_t id = instances.at(x, y);
      if (lc != kIgnoreClass && !registry.contains(lc)) {
        flag(PairIssue::Kind::kInvalidClass, x, y, lc, id);
        continue;
      }
      if (id == kIgnoreClass) {
        if (lc != kIgnoreClass) flag(PairIssue::Kind::kClassMismatch, x, y, lc, id);
        continue;
      }
      const DecodedInstance d = split_instance_id(id);
      if (!registry.contains(d.class_id)) {
        flag(PairIssue::Kind::kInvalidClass, x, y, lc, id);
        continue;
      }
      if (d.instance_index > 0 && !registry.at(d.class_id).has_instances) {
        flag(PairIssue::Kind::kInstanceOnStuff, x, y, lc, id);
        continue;
      }
      if (d.class_id != lc) {
        flag(PairIssue::Kind::kClassMismatch, x, y, lc, id);
        continue;
      }
      if (d.instance_index > 0 && seen.emplace(d.class_id, d.instance_index).second) {
        ++report.instances_per_class[d.class_id];
      }
    }
  }
  return report;
}

}  // namespace tspkit
