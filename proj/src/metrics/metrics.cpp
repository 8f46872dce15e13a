#include "tspkit/metrics.hpp"

#include <stdexcept>
#include <string>

namespace tspkit::metrics {

namespace {

void require_same_extent(const LabelMap& a, const LabelMap& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument(std::string(what) + ": ground truth is " +
                                std::to_string(a.width) + "x" + std::to_string(a.height) +
                                " but prediction is " + std::to_string(b.width) + "x" +
                                std::to_string(b.height));
  }
}

void require_valid_prediction(const LabelMap& pred, std::size_t k) {
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    if (pred.pixels[i] >= k) {
      throw std::invalid_argument("prediction has invalid class id " +
                                  std::to_string(pred.pixels[i]) + " at (x=" +
                                  std::to_string(i % pred.width) + ", y=" +
                                  std::to_string(i / pred.width) + ")");
    }
  }
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0 || num_classes > 255) {
    throw std::invalid_argument("confusion matrix needs 1..255 classes");
  }
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

void ConfusionMatrix::accumulate(const LabelMap& gt, const LabelMap& pred) {
  require_same_extent(gt, pred, "accumulate");
  require_valid_prediction(pred, k_);
  for (std::size_t i = 0; i < gt.pixels.size(); ++i) {
    const std::uint8_t g = gt.pixels[i];
    if (g == kIgnoreClass) continue;
    if (g >= k_) {
      throw std::invalid_argument("ground truth has invalid class id " + std::to_string(g));
    }
    ++counts_[g * k_ + pred.pixels[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw std::invalid_argument("cannot merge confusion matrices of different K");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMap& gt, const LabelMap& pred) {
  cm.accumulate(gt, pred);
  return cm;
}

ConfusionMatrix merge(ConfusionMatrix a, const ConfusionMatrix& b) {
  a.merge(b);
  return a;
}

IouResult miou(const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes();
  IouResult r;
  r.per_class.resize(k);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::uint64_t tp = cm.at(c, c);
    std::uint64_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class[c] = iou;
    sum += iou;
    ++present;
  }
  if (present == 0) throw std::domain_error("no classes present");
  r.mean = sum / static_cast<double>(present);
  return r;
}

// ---- instance sizes -----------------------------------------------------------

void InstanceSizeAccumulator::add(const InstanceMap& instances, const ClassRegistry& registry) {
  std::map<std::uint32_t, std::uint64_t> areas;  // encoded id -> pixels
  for (std::uint32_t id : instances.pixels) {
    if (id < kInstanceIdFactor) continue;
    ++areas[id];
  }
  for (const auto& [id, area] : areas) {
    const DecodedInstance d = decode_instance_id(id, registry);
    Totals& t = totals_[d.class_id];
    t.area += area;
    ++t.count;
  }
}

void InstanceSizeAccumulator::merge(const InstanceSizeAccumulator& other) {
  for (const auto& [c, t] : other.totals_) {
    totals_[c].area += t.area;
    totals_[c].count += t.count;
  }
}

InstanceSizes InstanceSizeAccumulator::means() const {
  InstanceSizes out;
  for (const auto& [c, t] : totals_) {
    if (t.count) out[c] = static_cast<double>(t.area) / static_cast<double>(t.count);
  }
  return out;
}

InstanceSizes average_instance_sizes(std::span<const InstanceMap> instances,
                                     const ClassRegistry& registry) {
  InstanceSizeAccumulator acc;
  for (const InstanceMap& m : instances) acc.add(m, registry);
  return acc.means();
}

// ---- weighted tallies ------------------------------------------------------------

WeightedTallies::WeightedTallies(const ClassRegistry& registry)
    : num_classes_(registry.size()) {
  for (std::uint8_t c : registry.instance_classes()) {
    classes_.push_back(c);
    tallies_[c];
  }
}

void WeightedTallies::accumulate(const LabelMap& gt_label, const InstanceMap& gt_instances,
                                 const LabelMap& pred_label) {
  require_same_extent(gt_label, pred_label, "iIoU");
  if (gt_instances.width != gt_label.width || gt_instances.height != gt_label.height) {
    throw std::invalid_argument("iIoU: instance map extent differs from label map");
  }
  require_valid_prediction(pred_label, num_classes_);

  std::map<std::uint32_t, std::uint64_t> areas;
  for (std::uint32_t id : gt_instances.pixels) {
    if (id >= kInstanceIdFactor) ++areas[id];
  }
  for (std::size_t i = 0; i < gt_label.pixels.size(); ++i) {
    const std::uint8_t g = gt_label.pixels[i];
    const std::uint8_t p = pred_label.pixels[i];
    if (g == kIgnoreClass) continue;
    if (p != g) {
      auto it = tallies_.find(p);
      if (it != tallies_.end()) ++it->second.fp;
    }
    const std::uint32_t id = gt_instances.pixels[i];
    if (id < kInstanceIdFactor) continue;
    const DecodedInstance d = split_instance_id(id);
    auto it = tallies_.find(d.class_id);
    if (it == tallies_.end()) {
      throw std::invalid_argument("instance id " + std::to_string(id) +
                                  " belongs to a class without instances");
    }
    Counts& counts = it->second.by_area[areas[id]];
    if (p == d.class_id) {
      ++counts.tp;
    } else {
      ++counts.fn;
    }
  }
}

void WeightedTallies::merge(const WeightedTallies& other) {
  if (other.num_classes_ != num_classes_ || other.classes_ != classes_) {
    throw std::invalid_argument("cannot merge tallies from different registries");
  }
  for (const auto& [c, t] : other.tallies_) {
    ClassTally& mine = tallies_[c];
    mine.fp += t.fp;
    for (const auto& [area, counts] : t.by_area) {
      mine.by_area[area].tp += counts.tp;
      mine.by_area[area].fn += counts.fn;
    }
  }
}

const WeightedTallies::ClassTally& WeightedTallies::tally(std::uint32_t class_id) const {
  auto it = tallies_.find(class_id);
  if (it == tallies_.end()) {
    throw std::invalid_argument("class " + std::to_string(class_id) + " has no instances");
  }
  return it->second;
}

double WeightedTallies::weighted(std::uint32_t class_id, const InstanceSizes& avg_sizes,
                                 bool tp) const {
  const ClassTally& t = tally(class_id);
  if (t.by_area.empty()) return 0.0;
  auto size = avg_sizes.find(class_id);
  if (size == avg_sizes.end()) {
    throw std::invalid_argument("no average instance size for class " +
                                std::to_string(class_id));
  }
  double acc = 0.0;
  for (const auto& [area, counts] : t.by_area) {
    const double w = size->second / static_cast<double>(area);
    acc += w * static_cast<double>(tp ? counts.tp : counts.fn);
  }
  return acc;
}

double WeightedTallies::weighted_tp(std::uint32_t class_id, const InstanceSizes& avg_sizes) const {
  return weighted(class_id, avg_sizes, true);
}

double WeightedTallies::weighted_fn(std::uint32_t class_id, const InstanceSizes& avg_sizes) const {
  return weighted(class_id, avg_sizes, false);
}

std::uint64_t WeightedTallies::false_positives(std::uint32_t class_id) const {
  return tally(class_id).fp;
}

bool WeightedTallies::has_instances(std::uint32_t class_id) const {
  return !tally(class_id).by_area.empty();
}

IiouResult iiou(const WeightedTallies& tallies, const InstanceSizes& avg_sizes) {
  IiouResult r;
  double sum = 0.0;
  for (std::uint32_t c : tallies.classes()) {
    const double tp = tallies.weighted_tp(c, avg_sizes);
    const double fn = tallies.weighted_fn(c, avg_sizes);
    const double fp = static_cast<double>(tallies.false_positives(c));
    const double denom = tp + fp + fn;
    if (denom == 0.0) continue;
    r.per_class[c] = tp / denom;
    sum += r.per_class[c];
  }
  if (!r.per_class.empty()) r.mean = sum / static_cast<double>(r.per_class.size());
  return r;
}

IiouResult iiou(const LabelMap& gt_label, const InstanceMap& gt_instances,
                const LabelMap& pred_label, const ClassRegistry& registry,
                const InstanceSizes& avg_sizes) {
  WeightedTallies t(registry);
  t.accumulate(gt_label, gt_instances, pred_label);
  return iiou(t, avg_sizes);
}

}  // namespace tspkit::metrics
