#pragma once

// Dataset statistics (traffic participants per image, crowded-image counts,
// humans/vehicles, instance-size distribution) and per-image crowd rate.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tspkit/annotation.hpp"
#include "tspkit/registry.hpp"

namespace tspkit::stats {

struct ParticipantCount {
  std::map<std::uint8_t, std::uint64_t> per_class;
  std::uint64_t total = 0;
  std::uint64_t humans = 0;
  std::uint64_t vehicles = 0;
};

// Distinct (class, index > 0) instances of traffic-participant classes.
ParticipantCount count_participants(const InstanceMap& instances, const ClassRegistry& registry);

inline constexpr std::size_t kSizeBins = 24;  // [2^k, 2^(k+1)) for k = 0..23

std::size_t size_bin(std::uint64_t area);

struct DatasetReport {
  std::uint64_t num_images = 0;
  std::uint64_t total_participants = 0;
  std::uint64_t humans_total = 0;
  std::uint64_t vehicles_total = 0;
  std::array<std::uint64_t, 3> tp_gt{};  // images with > 50, > 75, > 100 participants
  std::map<std::uint8_t, std::uint64_t> per_class_instance_counts;
  std::array<std::uint64_t, kSizeBins> size_histogram{};
  std::map<std::uint64_t, std::uint64_t> participants_per_image;  // count -> images

  double avg_tp() const;
  double humans_per_image() const;
  double vehicles_per_image() const;

  void merge(const DatasetReport& other);
  bool operator==(const DatasetReport&) const = default;
};

inline constexpr std::array<std::uint64_t, 3> kCrowdThresholds{50, 75, 100};

DatasetReport image_report(const InstanceMap& instances, const ClassRegistry& registry);

// Throws std::invalid_argument on an empty split.
DatasetReport dataset_report(std::span<const InstanceMap> instances, const ClassRegistry& registry,
                             std::size_t threads = 1);

nlohmann::ordered_json to_json(const DatasetReport& report, const ClassRegistry& registry);
// Aligned text table with one row for the dataset.
std::string render_table(const DatasetReport& report, const std::string& name);

struct CrowdRate {
  std::uint64_t participant_area = 0;  // S_t
  std::uint64_t road_area = 0;         // S_r
  double rate = 0.0;
  bool defined = false;  // false when S_t + S_r == 0; rate is then 0
};

CrowdRate crowd_rate(const LabelMap& label, const ClassRegistry& registry);

struct CrowdRateEntry {
  std::string image_id;
  CrowdRate value;
};

struct CrowdRateSeries {
  std::vector<CrowdRateEntry> entries;  // sorted by image_id
  std::vector<std::string> problems;    // unreadable or missing files

  double min_rate() const;
  double max_rate() const;
  double mean_rate() const;
};

CrowdRateSeries crowd_rate_series(std::vector<std::pair<std::string, LabelMap>> labels,
                                  const ClassRegistry& registry);
// Every *.png in dir is read as a label map; failures are listed, not fatal.
// expected_ids, when given, adds a problem line for each id without a file.
CrowdRateSeries crowd_rate_series_from_dir(const std::filesystem::path& dir,
                                           const ClassRegistry& registry,
                                           std::size_t threads = 1,
                                           const std::vector<std::string>& expected_ids = {});

std::string to_csv(const CrowdRateSeries& series);
std::string to_svg(const CrowdRateSeries& series);

}  // namespace tspkit::stats
