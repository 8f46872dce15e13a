#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tspkit/metrics.hpp"

using namespace tspkit;
using namespace tspkit::metrics;

namespace {

const ClassRegistry& toy() {
  static const ClassRegistry r = ClassRegistry::toy_registry();
  return r;
}

struct Sample {
  LabelMap gt;
  InstanceMap inst;
  LabelMap pred;
};

// Random toy-registry pair: classes 2 and 3 carry up to three instances each,
// a few pixels are ignored.
Sample random_sample(std::mt19937_64& rng, std::size_t max_side = 8) {
  std::uniform_int_distribution<std::size_t> side(1, max_side);
  const std::size_t w = side(rng), h = side(rng);
  Sample s{LabelMap(w, h), InstanceMap(w, h), LabelMap(w, h)};
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto g = static_cast<std::uint8_t>(rng() % 4);
    s.gt.pixels[i] = rng() % 10 == 0 ? 255 : g;
    s.pred.pixels[i] = static_cast<std::uint8_t>(rng() % 4);
    if (s.gt.pixels[i] == 255) {
      s.inst.pixels[i] = 255;
    } else if (g >= 2) {
      s.inst.pixels[i] = g * 1000 + 1 + static_cast<std::uint32_t>(rng() % 3);
    } else {
      s.inst.pixels[i] = g;
    }
  }
  return s;
}

InstanceSizes oracle_sizes(const std::vector<InstanceMap>& insts) {
  std::map<std::uint32_t, std::pair<double, double>> acc;
  for (const auto& m : insts) {
    for (const auto& [id, area] : oracle::instance_areas(m)) {
      acc[id / 1000].first += static_cast<double>(area);
      acc[id / 1000].second += 1.0;
    }
  }
  InstanceSizes out;
  for (const auto& [c, p] : acc) out[c] = p.first / p.second;
  return out;
}

}  // namespace

TEST(Confusion, MatchesPerPixelOracle) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < 1000; ++n) {
    const Sample s = random_sample(rng);
    ConfusionMatrix cm(4);
    cm.accumulate(s.gt, s.pred);
    const auto want = oracle::confusion(s.gt, s.pred, 4);
    for (std::size_t g = 0; g < 4; ++g)
      for (std::size_t p = 0; p < 4; ++p) ASSERT_EQ(cm.at(g, p), want[g * 4 + p]);
  }
}

TEST(Miou, MatchesSetOracle) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 1000; ++n) {
    const Sample s = random_sample(rng);
    if (std::all_of(s.gt.pixels.begin(), s.gt.pixels.end(), [](auto v) { return v == 255; }))
      continue;
    const IouResult r = miou(accumulate(ConfusionMatrix(4), s.gt, s.pred));
    const oracle::SetIou want = oracle::set_iou(s.gt, s.pred, 4);
    ASSERT_NEAR(r.mean, want.mean, 1e-12);
    for (std::size_t c = 0; c < 4; ++c) {
      ASSERT_EQ(r.per_class[c].has_value(), !std::isnan(want.per_class[c]));
      if (r.per_class[c]) ASSERT_NEAR(*r.per_class[c], want.per_class[c], 1e-12);
    }
  }
}

TEST(Miou, HandExample) {
  LabelMap gt(4, 1), pred(4, 1);
  gt.pixels = {0, 0, 1, 1};
  pred.pixels = {0, 1, 1, 1};
  const IouResult r = miou(accumulate(ConfusionMatrix(3), gt, pred));
  EXPECT_DOUBLE_EQ(*r.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(*r.per_class[1], 2.0 / 3.0);
  EXPECT_FALSE(r.per_class[2].has_value());
  EXPECT_DOUBLE_EQ(r.mean, (0.5 + 2.0 / 3.0) / 2.0);
}

TEST(Miou, PerfectPredictionAndErrors) {
  std::mt19937_64 rng(3);
  const Sample s = random_sample(rng);
  LabelMap pred = s.gt;
  for (auto& v : pred.pixels) v = v == 255 ? 0 : v;
  EXPECT_EQ(miou(accumulate(ConfusionMatrix(4), s.gt, pred)).mean, 1.0);
  try {
    miou(ConfusionMatrix(4));
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_STREQ(e.what(), "no classes present");
  }
  LabelMap bad = pred;
  bad.pixels[0] = 255;
  EXPECT_THROW(ConfusionMatrix(4).accumulate(s.gt, bad), std::invalid_argument);
  EXPECT_THROW(ConfusionMatrix(4).accumulate(s.gt, LabelMap(9, 9, 0)), std::invalid_argument);
  EXPECT_THROW(ConfusionMatrix(4).merge(ConfusionMatrix(5)), std::invalid_argument);
}

TEST(Confusion, MergeIdentityAndCommutativity) {
  std::mt19937_64 rng(4);
  for (int n = 0; n < 50; ++n) {
    const Sample a = random_sample(rng), b = random_sample(rng);
    const ConfusionMatrix ca = accumulate(ConfusionMatrix(4), a.gt, a.pred);
    const ConfusionMatrix cb = accumulate(ConfusionMatrix(4), b.gt, b.pred);
    EXPECT_EQ(merge(ca, ConfusionMatrix(4)), ca);
    EXPECT_EQ(merge(ca, cb), merge(cb, ca));
    EXPECT_EQ(merge(ca, cb), accumulate(ca, b.gt, b.pred));
  }
}

TEST(Confusion, ThreeSevenSplitEqualsWhole) {
  std::mt19937_64 rng(5);
  std::vector<Sample> set;
  for (int i = 0; i < 10; ++i) set.push_back(random_sample(rng));
  ConfusionMatrix whole(4), first(4), second(4);
  for (int i = 0; i < 10; ++i) {
    whole.accumulate(set[i].gt, set[i].pred);
    (i < 3 ? first : second).accumulate(set[i].gt, set[i].pred);
  }
  EXPECT_EQ(merge(first, second), whole);
  EXPECT_EQ(miou(merge(first, second)).mean, miou(whole).mean);
}

TEST(Miou, PixelPermutationInvariance) {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 100; ++n) {
    Sample s = random_sample(rng);
    std::vector<std::size_t> perm(s.gt.pixels.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Sample t = s;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      t.gt.pixels[i] = s.gt.pixels[perm[i]];
      t.pred.pixels[i] = s.pred.pixels[perm[i]];
    }
    EXPECT_EQ(accumulate(ConfusionMatrix(4), s.gt, s.pred),
              accumulate(ConfusionMatrix(4), t.gt, t.pred));
  }
}

TEST(InstanceSizes, Averages) {
  InstanceMap a(10, 1, 0), b(30, 1, 0);
  std::fill(a.pixels.begin(), a.pixels.end(), 2001);
  std::fill(b.pixels.begin(), b.pixels.end(), 2001);
  const std::vector<InstanceMap> one{a};
  EXPECT_EQ(average_instance_sizes(one, toy()).at(2), 10.0);
  const std::vector<InstanceMap> two{a, b};
  const InstanceSizes s = average_instance_sizes(two, toy());
  EXPECT_EQ(s.at(2), 20.0);
  EXPECT_EQ(s.count(3), 0u);
  InstanceSizeAccumulator x, y;
  x.add(a, toy());
  y.add(b, toy());
  x.merge(y);
  EXPECT_EQ(x.means(), s);
}

TEST(Iiou, TwoInstanceHandExample) {
  LabelMap gt(10, 4, 2), pred(10, 4, 0);
  InstanceMap inst(10, 4, 2002);
  for (std::size_t x = 0; x < 10; ++x) {
    inst.at(x, 0) = 2001;
    pred.at(x, 0) = 2;
    pred.at(x, 1) = 2;
  }
  for (std::size_t x = 0; x < 5; ++x) pred.at(x, 2) = 2;
  const InstanceSizes sizes{{2, 20.0}};
  const IiouResult r = iiou(gt, inst, pred, toy(), sizes);
  ASSERT_EQ(r.per_class.size(), 1u);
  EXPECT_DOUBLE_EQ(r.per_class.at(2), 0.75);
  EXPECT_DOUBLE_EQ(*r.mean, 0.75);
  EXPECT_DOUBLE_EQ(miou(accumulate(ConfusionMatrix(4), gt, pred)).per_class[2].value(), 25.0 / 40.0);
}

TEST(Iiou, MatchesDirectOracle) {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 300; ++n) {
    std::vector<LabelMap> gts, preds;
    std::vector<InstanceMap> insts;
    WeightedTallies t(toy());
    for (int i = 0; i < 3; ++i) {
      const Sample s = random_sample(rng);
      gts.push_back(s.gt);
      preds.push_back(s.pred);
      insts.push_back(s.inst);
      t.accumulate(s.gt, s.inst, s.pred);
    }
    const InstanceSizes sizes = oracle_sizes(insts);
    EXPECT_EQ(average_instance_sizes(insts, toy()), sizes);
    const IiouResult r = iiou(t, sizes);
    for (const auto& [c, v] : r.per_class) {
      const double avg = sizes.count(c) ? sizes.at(c) : 1.0;  // FP-only class: weight unused
      ASSERT_NEAR(v, oracle::class_iiou(gts, insts, preds, c, avg), 1e-12);
    }
  }
}

TEST(Iiou, EqualAreasReduceToIou) {
  LabelMap gt(4, 2, 0), pred(4, 2, 0);
  InstanceMap inst(4, 2, 0);
  inst.pixels = {2001, 2001, 2002, 2002, 0, 0, 3001, 3001};
  gt.pixels = {2, 2, 2, 2, 0, 0, 3, 3};
  pred.pixels = {2, 0, 2, 2, 2, 3, 3, 1};
  const std::vector<InstanceMap> all{inst};
  const IiouResult r = iiou(gt, inst, pred, toy(), average_instance_sizes(all, toy()));
  const IouResult iou = miou(accumulate(ConfusionMatrix(4), gt, pred));
  EXPECT_EQ(r.per_class.at(2), *iou.per_class[2]);
  EXPECT_EQ(r.per_class.at(3), *iou.per_class[3]);
}

TEST(Iiou, MergeMatchesWholeAndRejectsMismatch) {
  std::mt19937_64 rng(8);
  WeightedTallies whole(toy()), a(toy()), b(toy());
  for (int i = 0; i < 10; ++i) {
    const Sample s = random_sample(rng);
    whole.accumulate(s.gt, s.inst, s.pred);
    (i % 3 ? a : b).accumulate(s.gt, s.inst, s.pred);
  }
  WeightedTallies ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  EXPECT_EQ(ab, whole);
  EXPECT_EQ(ba, whole);
  WeightedTallies other(ClassRegistry::default_registry());
  EXPECT_THROW(other.merge(a), std::invalid_argument);
}

TEST(Iiou, NoInstancesNoPredictionsGivesEmpty) {
  LabelMap gt(3, 1, 0), pred(3, 1, 1);
  InstanceMap inst(3, 1, 0);
  const IiouResult r = iiou(gt, inst, pred, toy(), {});
  EXPECT_TRUE(r.per_class.empty());
  EXPECT_FALSE(r.mean.has_value());
}

TEST(Iiou, InstanceOnStuffClassIsAnError) {
  LabelMap gt(1, 1, 1), pred(1, 1, 1);
  InstanceMap inst(1, 1, 1001);
  WeightedTallies t(toy());
  EXPECT_THROW(t.accumulate(gt, inst, pred), std::invalid_argument);
}
