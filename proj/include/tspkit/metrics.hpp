#pragma once

// Pixel-level scoring: confusion matrices, per-class IoU / mIoU, and the
// instance-size-weighted iIoU over instance classes.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tspkit/annotation.hpp"
#include "tspkit/registry.hpp"

namespace tspkit::metrics {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const { return k_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * k_ + pred]; }
  std::uint64_t total() const;

  // Adds one gt/pred pair. gt pixels equal to 255 are skipped; pred must not
  // contain 255 or ids >= K.
  void accumulate(const LabelMap& gt, const LabelMap& pred);
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMap& gt, const LabelMap& pred);
ConfusionMatrix merge(ConfusionMatrix a, const ConfusionMatrix& b);

struct IouResult {
  // nullopt for classes absent from both gt and prediction.
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
};

// Throws std::domain_error("no classes present") when every class is absent.
IouResult miou(const ConfusionMatrix& cm);

// Mean pixel area per instance class over all instances of a split.
using InstanceSizes = std::map<std::uint32_t, double>;

class InstanceSizeAccumulator {
 public:
  void add(const InstanceMap& instances, const ClassRegistry& registry);
  void merge(const InstanceSizeAccumulator& other);
  // Classes with zero instances are omitted.
  InstanceSizes means() const;

  bool operator==(const InstanceSizeAccumulator&) const = default;

 private:
  struct Totals {
    std::uint64_t area = 0;
    std::uint64_t count = 0;
    bool operator==(const Totals&) const = default;
  };
  std::map<std::uint32_t, Totals> totals_;
};

InstanceSizes average_instance_sizes(std::span<const InstanceMap> instances,
                                     const ClassRegistry& registry);

// Instance-weighted tallies. True positives and false negatives of every
// ground-truth instance are kept as integer pixel counts grouped by the
// instance's area, so merging is exact and order-independent; the weighted
// sums are formed only when sizes are supplied.
class WeightedTallies {
 public:
  explicit WeightedTallies(const ClassRegistry& registry);

  void accumulate(const LabelMap& gt_label, const InstanceMap& gt_instances,
                  const LabelMap& pred_label);
  void merge(const WeightedTallies& other);

  // iTP / iFN with weight avg_sizes[c] / area per instance pixel.
  double weighted_tp(std::uint32_t class_id, const InstanceSizes& avg_sizes) const;
  double weighted_fn(std::uint32_t class_id, const InstanceSizes& avg_sizes) const;
  std::uint64_t false_positives(std::uint32_t class_id) const;
  bool has_instances(std::uint32_t class_id) const;
  const std::vector<std::uint32_t>& classes() const { return classes_; }

  bool operator==(const WeightedTallies&) const = default;

 private:
  struct Counts {
    std::uint64_t tp = 0;
    std::uint64_t fn = 0;
    bool operator==(const Counts&) const = default;
  };
  struct ClassTally {
    std::map<std::uint64_t, Counts> by_area;
    std::uint64_t fp = 0;
    bool operator==(const ClassTally&) const = default;
  };
  const ClassTally& tally(std::uint32_t class_id) const;
  double weighted(std::uint32_t class_id, const InstanceSizes& avg_sizes, bool tp) const;

  std::size_t num_classes_;
  std::vector<std::uint32_t> classes_;  // instance classes, ascending
  std::map<std::uint32_t, ClassTally> tallies_;
};

struct IiouResult {
  std::map<std::uint32_t, double> per_class;  // present instance classes only
  std::optional<double> mean;
};

IiouResult iiou(const WeightedTallies& tallies, const InstanceSizes& avg_sizes);
IiouResult iiou(const LabelMap& gt_label, const InstanceMap& gt_instances,
                const LabelMap& pred_label, const ClassRegistry& registry,
                const InstanceSizes& avg_sizes);

}  // namespace tspkit::metrics
