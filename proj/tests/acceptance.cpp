// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is 0 when no
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tspkit/dataset_io.hpp"
#include "tspkit/drd.hpp"
#include "tspkit/drd_check.hpp"
#include "tspkit/metrics.hpp"
#include "tspkit/stats.hpp"
#include "tspkit/synthetic.hpp"
#include "tspkit/train.hpp"

using namespace tspkit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned thresholds.
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kGradSeeds = 5;
constexpr std::size_t kGradProbes = 32;
constexpr double kGradBudgetSeconds = 60.0;
constexpr std::size_t kAttentionCases = 1000;
constexpr double kRowSumTolerance = 1e-9;
constexpr double kToyAccuracy = 0.95;
constexpr std::size_t kToySteps = 500;
constexpr double kToyBudgetSeconds = 300.0;
constexpr std::size_t kMetricCases = 1000;
constexpr double kMiouTolerance = 1e-12;
constexpr std::size_t kDegeneracyCases = 200;
constexpr std::size_t kPartitions = 20;
constexpr std::size_t kCrowdCases = 100;
constexpr std::size_t kRoundTripImages = 100;
constexpr double kFixtureMeanTolerance = 0.05;

struct Verdict {
  enum Kind { kPass, kFail, kSkip } kind;
  std::string detail;
};

Verdict fail(std::string d) { return {Verdict::kFail, std::move(d)}; }
Verdict check(bool ok, std::string d) { return {ok ? Verdict::kPass : Verdict::kFail, std::move(d)}; }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int precision = 3, bool sci = false) {
  std::ostringstream os;
  if (sci) os << std::scientific;
  else os << std::fixed;
  os.precision(precision);
  os << v;
  return os.str();
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(),
                    [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; });
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

drd::DrdConfig rrm_config(std::size_t n, std::size_t h, std::size_t c) {
  drd::DrdConfig cfg;
  cfg.num_tokens = n;
  cfg.num_heads = h;
  cfg.channels = c;
  return cfg;
}

void zero(Tensor t) {
  for (double& v : t.mutable_data()) v = 0.0;
}

// ---- 1 ---------------------------------------------------------------------

Verdict gradient_check() {
  const auto t0 = Clock::now();
  const drd::DrdConfig cfg = rrm_config(5, 4, 32);
  double worst = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < kGradSeeds; ++seed) {
    GradCheckOptions opts;
    opts.tolerance = kGradTolerance;
    opts.max_probes_per_input = kGradProbes;
    opts.seed = seed;
    for (const auto& stage : drd::check_drd_gradients(cfg, seed, 32, opts)) {
      worst = std::max(worst, stage.report.max_rel_error);
      ok = ok && stage.report.passed;
    }
  }
  const double secs = seconds_since(t0);
  return check(ok && worst < kGradTolerance && secs < kGradBudgetSeconds,
               "max rel err " + num(worst, 2, true) + " (< " + num(kGradTolerance, 0, true) +
                   "), " + std::to_string(kGradSeeds) + " seeds, " + num(secs, 1) + " s (< " +
                   num(kGradBudgetSeconds, 0) + " s)");
}

// ---- 2 ---------------------------------------------------------------------

Verdict attention_rows() {
  std::mt19937_64 rng(2024);
  const std::size_t heads_choices[] = {1, 2, 4};
  double worst = 0.0;
  std::size_t substitution_failures = 0;
  for (std::size_t n = 0; n < kAttentionCases; ++n) {
    const std::size_t h = heads_choices[rng() % 3];
    const std::size_t c = h * (1 + rng() % 4);
    const drd::DrdConfig cfg = rrm_config(1 + rng() % 6, h, std::max<std::size_t>(c, 2));
    const std::size_t hw = 1 + rng() % 24;
    const drd::DrdParams p = drd::DrdParams::init(cfg, n);
    const Tensor f = Tensor::randn({hw, cfg.channels}, rng, 0.5 + static_cast<double>(rng() % 4));
    const auto r = drd::region_refine_forward(f, p.refine.tokens, p.refine, cfg);
    for (const Tensor* t : {&r.token_attention, &r.A}) {
      const auto d = t->data();
      for (std::size_t row = 0; row < d.size() / hw; ++row) {
        double s = 0.0;
        for (std::size_t j = 0; j < hw; ++j) s += d[row * hw + j];
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
    // One-hot rows select exactly the chosen feature row, zeros elsewhere.
    const std::size_t tokens = cfg.num_tokens, ch = cfg.channels;
    std::vector<std::size_t> hot(tokens);
    std::vector<double> onehot(tokens * hw, 0.0);
    for (std::size_t i = 0; i < tokens; ++i) {
      hot[i] = rng() % hw;
      onehot[i * hw + hot[i]] = 1.0;
    }
    const Tensor s = broadcast_token_product(Tensor::from({tokens, hw}, onehot), f);
    for (std::size_t i = 0; i < tokens; ++i)
      for (std::size_t j = 0; j < hw; ++j)
        for (std::size_t k = 0; k < ch; ++k) {
          const double want = j == hot[i] ? f.at({j, k}) : 0.0;
          // == rather than bitwise: 0 * negative feature is -0.0.
          if (s.at({i, j, k}) != want) ++substitution_failures;
        }
  }
  return check(worst <= kRowSumTolerance && substitution_failures == 0,
               std::to_string(kAttentionCases) + " forwards, worst |row sum - 1| " +
                   num(worst, 2, true) + " (<= " + num(kRowSumTolerance, 0, true) + "), " +
                   std::to_string(substitution_failures) + " one-hot mismatches");
}

// ---- 3 ---------------------------------------------------------------------

Verdict residual_identity() {
  std::size_t mismatches = 0;
  const std::size_t cases = 50;
  for (std::uint64_t seed = 0; seed < cases; ++seed) {
    const drd::DrdConfig cfg = rrm_config(1 + seed % 7, 4, 32);
    drd::DrdParams p = drd::DrdParams::init(cfg, seed);
    zero(p.refine.value.weight);
    zero(p.refine.value.bias);
    zero(p.refine.ffn_out.weight);
    zero(p.refine.ffn_out.bias);
    std::mt19937_64 rng(seed);
    const Tensor f = Tensor::randn({1 + seed * 2, 32}, rng, 1.0);
    const auto r = drd::region_refine_forward(f, p.refine.tokens, p.refine, cfg);
    if (!same_bits(r.R_O.data(), p.refine.tokens.data())) ++mismatches;
  }
  return check(mismatches == 0, std::to_string(cases) + " cases, " + std::to_string(mismatches) +
                                    " with R_O != R");
}

// ---- 4 ---------------------------------------------------------------------

Verdict token_permutation() {
  std::size_t mismatches = 0;
  const std::size_t cases = 100;
  for (std::uint64_t seed = 0; seed < cases; ++seed) {
    std::mt19937_64 rng(seed + 77);
    const drd::DrdConfig cfg = rrm_config(2 + seed % 8, 4, 16);
    const drd::DrdParams p = drd::DrdParams::init(cfg, seed);
    const std::size_t n = cfg.num_tokens, c = cfg.channels, hw = 1 + rng() % 30;
    const Tensor f = Tensor::randn({hw, c}, rng, 1.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> moved;
    for (std::size_t i : perm) {
      const auto row = p.refine.tokens.data().subspan(i * c, c);
      moved.insert(moved.end(), row.begin(), row.end());
    }
    const auto base = drd::region_refine_forward(f, p.refine.tokens, p.refine, cfg);
    const auto perm_out = drd::region_refine_forward(f, Tensor::from({n, c}, moved), p.refine, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      if (!same_bits(perm_out.A.data().subspan(i * hw, hw), base.A.data().subspan(perm[i] * hw, hw)) ||
          !same_bits(perm_out.S.data().subspan(i * hw * c, hw * c),
                     base.S.data().subspan(perm[i] * hw * c, hw * c))) {
        ++mismatches;
      }
    }
  }
  return check(mismatches == 0, std::to_string(cases) + " permutations, " +
                                    std::to_string(mismatches) + " mismatched token blocks");
}

// ---- 5 ---------------------------------------------------------------------

Verdict toy_training() {
  const auto t0 = Clock::now();
  const ClassRegistry reg = ClassRegistry::toy_registry();
  const std::uint64_t seed = 0;
  SyntheticOptions gen;
  gen.seed = seed;
  gen.count = 8;
  const SyntheticSet set = generate_synthetic(reg, gen);
  const drd::DrdConfig cfg = drd::preset("setting2", reg.size());
  drd::TrainOptions opts;
  opts.steps = kToySteps;
  opts.seed = seed;
  try {
    const drd::TrainResult a = drd::train_toy(set.images, cfg, opts);
    const double secs = seconds_since(t0);
    const drd::TrainResult b = drd::train_toy(set.images, cfg, opts);
    bool deterministic = same_bits(a.losses, b.losses);
    const auto pa = a.params.named_parameters(), pb = b.params.named_parameters();
    for (std::size_t i = 0; i < pa.size(); ++i)
      deterministic = deterministic && same_bits(pa[i].second.data(), pb[i].second.data());
    const Tensor input = drd::images_to_tensor(set.images);
    const double acc = drd::pixel_accuracy(drd::drd_forward(input, a.params, cfg).logits,
                                           drd::downsample_labels(set.images, 8));
    return check(acc >= kToyAccuracy && deterministic && secs < kToyBudgetSeconds,
                 "N=5 h=12 C=36, pixel accuracy " + num(acc, 4) + " (>= " + num(kToyAccuracy, 2) +
                     ") after " + std::to_string(kToySteps) + " steps, " +
                     (deterministic ? "deterministic" : "NOT deterministic") + ", " +
                     num(secs, 1) + " s per run (< " + num(kToyBudgetSeconds, 0) + " s)");
  } catch (const drd::TrainingDiverged& e) {
    return fail(std::string("training diverged: ") + e.what());
  }
}

// ---- 6 ---------------------------------------------------------------------

struct Sample {
  LabelMap gt;
  InstanceMap inst;
  LabelMap pred;
};

// Toy registry (K=4): classes 2 and 3 carry instances.
Sample random_sample(std::mt19937_64& rng, std::size_t max_side) {
  const std::size_t w = 1 + rng() % max_side, h = 1 + rng() % max_side;
  Sample s{LabelMap(w, h), InstanceMap(w, h), LabelMap(w, h)};
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto g = static_cast<std::uint8_t>(rng() % 4);
    s.gt.pixels[i] = rng() % 10 == 0 ? kIgnoreClass : g;
    s.pred.pixels[i] = static_cast<std::uint8_t>(rng() % 4);
    if (s.gt.pixels[i] == kIgnoreClass) s.inst.pixels[i] = kIgnoreClass;
    else if (g >= 2) s.inst.pixels[i] = g * 1000 + 1 + static_cast<std::uint32_t>(rng() % 3);
    else s.inst.pixels[i] = g;
  }
  return s;
}

Verdict metric_oracles() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  std::size_t cm_mismatch = 0, presence_mismatch = 0, evaluated = 0;
  while (evaluated < kMetricCases) {
    const Sample s = random_sample(rng, 8);
    metrics::ConfusionMatrix cm(4);
    cm.accumulate(s.gt, s.pred);
    const auto want = oracle::confusion(s.gt, s.pred, 4);
    for (std::size_t i = 0; i < 16; ++i)
      if (cm.at(i / 4, i % 4) != want[i]) ++cm_mismatch;
    if (cm.total() == 0) continue;  // all ignored: mIoU undefined
    ++evaluated;
    const metrics::IouResult r = metrics::miou(cm);
    const oracle::SetIou o = oracle::set_iou(s.gt, s.pred, 4);
    worst = std::max(worst, std::abs(r.mean - o.mean));
    for (std::size_t c = 0; c < 4; ++c) {
      if (r.per_class[c].has_value() == std::isnan(o.per_class[c])) ++presence_mismatch;
      else if (r.per_class[c]) worst = std::max(worst, std::abs(*r.per_class[c] - o.per_class[c]));
    }
  }
  return check(worst <= kMiouTolerance && cm_mismatch == 0 && presence_mismatch == 0,
               std::to_string(kMetricCases) + " pairs, max |miou - oracle| " + num(worst, 2, true) +
                   " (<= " + num(kMiouTolerance, 0, true) + "), " + std::to_string(cm_mismatch) +
                   " confusion mismatches");
}

// ---- 7 ---------------------------------------------------------------------

Verdict iiou_degeneracy() {
  std::mt19937_64 rng(7);
  const ClassRegistry reg = ClassRegistry::toy_registry();
  std::size_t mismatches = 0, compared = 0;
  for (std::size_t n = 0; n < kDegeneracyCases; ++n) {
    // Per class a single instance area; instances are scattered pixel sets.
    const std::uint64_t area[4] = {0, 0, 1 + rng() % 6, 1 + rng() % 6};
    const std::size_t images = 1 + rng() % 3;
    metrics::ConfusionMatrix cm(4);
    metrics::WeightedTallies tallies(reg);
    metrics::InstanceSizeAccumulator sizes;
    for (std::size_t m = 0; m < images; ++m) {
      const std::size_t w = 4 + rng() % 8, h = 4 + rng() % 8, total = w * h;
      LabelMap gt(w, h, 0), pred(w, h, 0);
      InstanceMap inst(w, h, 0);
      std::vector<std::size_t> order(total);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t next = 0;
      for (std::uint32_t c : {2u, 3u}) {
        const std::size_t count = rng() % 4;
        for (std::uint32_t k = 1; k <= count && next + area[c] <= total; ++k)
          for (std::uint64_t a = 0; a < area[c]; ++a) {
            gt.pixels[order[next]] = static_cast<std::uint8_t>(c);
            inst.pixels[order[next]] = c * 1000 + k;
            ++next;
          }
      }
      for (; next < total; ++next) {
        const std::size_t i = order[next];
        const std::uint8_t v = rng() % 8 == 0 ? kIgnoreClass : static_cast<std::uint8_t>(rng() % 2);
        gt.pixels[i] = v;
        inst.pixels[i] = v;
      }
      for (auto& p : pred.pixels) p = static_cast<std::uint8_t>(rng() % 4);
      cm.accumulate(gt, pred);
      tallies.accumulate(gt, inst, pred);
      sizes.add(inst, reg);
    }
    if (cm.total() == 0) continue;
    const metrics::IouResult iou = metrics::miou(cm);
    const metrics::IiouResult inst_iou = metrics::iiou(tallies, sizes.means());
    for (std::uint32_t c : {2u, 3u}) {
      auto it = inst_iou.per_class.find(c);
      if (it == inst_iou.per_class.end()) {
        if (iou.per_class[c] && *iou.per_class[c] != 0.0) ++mismatches;
        continue;
      }
      ++compared;
      if (!iou.per_class[c] || !same_bits(it->second, *iou.per_class[c])) ++mismatches;
    }
  }
  return check(mismatches == 0 && compared > 0,
               std::to_string(kDegeneracyCases) + " cases, " + std::to_string(compared) +
                   " class comparisons, " + std::to_string(mismatches) + " inexact");
}

// ---- 8 ---------------------------------------------------------------------

struct MetricState {
  metrics::ConfusionMatrix cm{4};
  metrics::WeightedTallies tallies{ClassRegistry::toy_registry()};
  metrics::InstanceSizeAccumulator sizes;
  stats::DatasetReport report;

  void add(const Sample& s, const ClassRegistry& reg) {
    cm.accumulate(s.gt, s.pred);
    tallies.accumulate(s.gt, s.inst, s.pred);
    sizes.add(s.inst, reg);
    report.merge(stats::image_report(s.inst, reg));
  }
  void merge(const MetricState& o) {
    cm.merge(o.cm);
    tallies.merge(o.tallies);
    sizes.merge(o.sizes);
    report.merge(o.report);
  }
};

bool same_results(const MetricState& a, const MetricState& b) {
  if (!(a.cm == b.cm && a.tallies == b.tallies && a.sizes == b.sizes && a.report == b.report))
    return false;
  const auto ia = metrics::miou(a.cm), ib = metrics::miou(b.cm);
  if (!same_bits(ia.mean, ib.mean)) return false;
  const auto ja = metrics::iiou(a.tallies, a.sizes.means());
  const auto jb = metrics::iiou(b.tallies, b.sizes.means());
  if (ja.per_class.size() != jb.per_class.size() || ja.mean.has_value() != jb.mean.has_value())
    return false;
  if (ja.mean && !same_bits(*ja.mean, *jb.mean)) return false;
  for (const auto& [c, v] : ja.per_class)
    if (!jb.per_class.count(c) || !same_bits(v, jb.per_class.at(c))) return false;
  return same_bits(a.report.avg_tp(), b.report.avg_tp()) &&
         same_bits(a.report.humans_per_image(), b.report.humans_per_image());
}

Verdict partition_invariance() {
  std::mt19937_64 rng(8);
  const ClassRegistry reg = ClassRegistry::toy_registry();
  std::vector<Sample> set;
  for (int i = 0; i < 40; ++i) set.push_back(random_sample(rng, 16));
  MetricState whole;
  for (const auto& s : set) whole.add(s, reg);
  std::vector<InstanceMap> all_inst;
  for (const auto& s : set) all_inst.push_back(s.inst);
  const bool report_ok = stats::dataset_report(all_inst, reg, 3) == whole.report;

  std::size_t failures = 0;
  for (std::size_t p = 0; p < kPartitions; ++p) {
    const std::size_t shards = 2 + rng() % 6;
    std::vector<MetricState> parts(shards);
    for (const auto& s : set) parts[rng() % shards].add(s, reg);
    std::shuffle(parts.begin(), parts.end(), rng);
    MetricState merged;
    for (const auto& part : parts) merged.merge(part);
    if (!same_results(merged, whole)) ++failures;
  }
  return check(failures == 0 && report_ok,
               std::to_string(kPartitions) + " random partitions of 40 images, " +
                   std::to_string(failures) + " differing from the whole-set result");
}

// ---- 9 ---------------------------------------------------------------------

LabelMap road_and_cars(std::size_t road, std::size_t cars, std::size_t other) {
  const ClassRegistry reg = ClassRegistry::default_registry();
  LabelMap m(road + cars + other, 1, *reg.find("sky"));
  std::fill_n(m.pixels.begin(), road, *reg.road_class());
  std::fill_n(m.pixels.begin() + static_cast<long>(road), cars, *reg.find("car"));
  return m;
}

Verdict crowd_rate() {
  const ClassRegistry reg = ClassRegistry::default_registry();
  const stats::CrowdRate fixed = stats::crowd_rate(road_and_cars(700, 300, 24), reg);
  std::mt19937_64 rng(9);
  std::size_t violations = 0;
  for (std::size_t n = 0; n < kCrowdCases; ++n) {
    const std::size_t road = rng() % 500, cars = rng() % 500;
    const std::size_t more = cars + 1 + rng() % 100;
    const double a = stats::crowd_rate(road_and_cars(road, cars, rng() % 50), reg).rate;
    const double b = stats::crowd_rate(road_and_cars(road, more, rng() % 50), reg).rate;
    if (!(b >= a) || (road > 0 && !(b > a))) ++violations;
  }
  return check(fixed.rate == 0.3 && violations == 0,
               "300/700 gives " + num(fixed.rate, 17) + ", " + std::to_string(violations) +
                   " monotonicity violations in " + std::to_string(kCrowdCases) + " cases");
}

// ---- 10 --------------------------------------------------------------------

Verdict round_trip() {
  const fs::path root = fs::temp_directory_path() / "tspkit_acceptance_roundtrip";
  fs::remove_all(root);
  const ClassRegistry reg = ClassRegistry::default_registry();
  std::vector<AnnotatedImage> images;
  const std::size_t sizes[][2] = {{64, 48}, {33, 17}, {128, 96}, {20, 80}};
  for (std::size_t b = 0; b < 4; ++b) {
    SyntheticOptions o;
    o.seed = 100 + b;
    o.count = kRoundTripImages / 4;
    o.width = sizes[b][0];
    o.height = sizes[b][1];
    o.participants_per_image = b * 3;
    o.min_size = 2;
    o.max_size = 6;
    o.id_prefix = "batch" + std::to_string(b);
    for (auto& img : generate_synthetic(reg, o).images) images.push_back(std::move(img));
  }
  save_dataset(root, images, reg);
  const SplitLoadResult loaded = load_split(root, Split::kTrain, reg, true);
  std::sort(images.begin(), images.end(),
            [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  std::size_t issues = 0;
  for (const auto& img : loaded.images) issues += validate_pair(img.label, img.instances, reg).total_issues;
  const bool identical = loaded.images == images;
  fs::remove_all(root);
  return check(identical && issues == 0 && loaded.errors.empty() &&
                   loaded.images.size() == kRoundTripImages,
               std::to_string(loaded.images.size()) + " images reloaded, " +
                   (identical ? "bit-identical" : "DIFFERENT") + ", " + std::to_string(issues) +
                   " validate_pair issues, " + std::to_string(loaded.errors.size()) + " load errors");
}

// ---- 11 --------------------------------------------------------------------

Verdict fixtures() {
  const char* env = std::getenv("TSP6K_ROOT");
  if (env == nullptr || *env == '\0' || !fs::is_directory(env)) {
    return {Verdict::kSkip, "TSP6K_ROOT not set or not a directory"};
  }
  const fs::path root(env);
  const ClassRegistry reg = load_dataset_registry(root);
  std::vector<InstanceMap> maps;
  std::size_t errors = 0;
  for (Split split : {Split::kTrain, Split::kVal}) {
    SplitLoadResult r = load_split(root, split, reg);
    errors += r.errors.size();
    for (auto& img : r.images) maps.push_back(std::move(img.instances));
  }
  if (errors > 0 || maps.empty()) {
    return fail(std::to_string(errors) + " load errors, " + std::to_string(maps.size()) + " images");
  }
  const stats::DatasetReport r = stats::dataset_report(maps, reg, 0);
  auto near = [](double v, double want) { return std::abs(v - want) <= kFixtureMeanTolerance; };
  const bool ok = r.tp_gt[0] == 1227 && r.tp_gt[1] == 367 && r.tp_gt[2] == 73 &&
                  near(r.avg_tp(), 42.0) && near(r.humans_per_image(), 10.7) &&
                  near(r.vehicles_per_image(), 31.3);
  return check(ok, "avg TP " + num(r.avg_tp(), 2) + ", TP>50 " + std::to_string(r.tp_gt[0]) +
                       ", TP>75 " + std::to_string(r.tp_gt[1]) + ", TP>100 " +
                       std::to_string(r.tp_gt[2]) + ", humans/img " +
                       num(r.humans_per_image(), 2) + ", vehicles/img " +
                       num(r.vehicles_per_image(), 2));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient check", gradient_check},
      {"attention rows", attention_rows},
      {"residual identity", residual_identity},
      {"token permutation", token_permutation},
      {"toy training", toy_training},
      {"metric oracles", metric_oracles},
      {"iIoU degeneracy", iiou_degeneracy},
      {"partition invariance", partition_invariance},
      {"crowd rate", crowd_rate},
      {"format round trip", round_trip},
      {"dataset fixtures", fixtures},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.kind == Verdict::kPass ? "PASS" : v.kind == Verdict::kFail ? "FAIL" : "SKIP";
    failures += v.kind == Verdict::kFail;
    std::cout << "[" << tag << "] " << (i + 1) << ". " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
