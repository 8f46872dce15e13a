#pragma once

// Naive reference implementations. None of these call into the library's
// arithmetic; they take plain vectors and loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "tspkit/annotation.hpp"
#include "tspkit/registry.hpp"
#include "tspkit/tensor.hpp"

namespace oracle {

inline std::vector<double> values(const tspkit::Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

struct ConvSpec {
  std::size_t batch, cin, h, w, cout, k, stride, pad, dil, groups;
};

// weight [cout, cin/groups, k, k]
inline std::vector<double> conv2d(const std::vector<double>& x, const std::vector<double>& wt,
                                  const std::vector<double>& bias, const ConvSpec& s,
                                  std::size_t& oh, std::size_t& ow) {
  oh = (s.h + 2 * s.pad - s.dil * (s.k - 1) - 1) / s.stride + 1;
  ow = (s.w + 2 * s.pad - s.dil * (s.k - 1) - 1) / s.stride + 1;
  const std::size_t cig = s.cin / s.groups, cog = s.cout / s.groups;
  std::vector<double> y(s.batch * s.cout * oh * ow, 0.0);
  for (std::size_t b = 0; b < s.batch; ++b)
    for (std::size_t co = 0; co < s.cout; ++co)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          const std::size_t g = co / cog;
          for (std::size_t ci = 0; ci < cig; ++ci)
            for (std::size_t ky = 0; ky < s.k; ++ky)
              for (std::size_t kx = 0; kx < s.k; ++kx) {
                const long iy = static_cast<long>(oy * s.stride + ky * s.dil) -
                                static_cast<long>(s.pad);
                const long ix = static_cast<long>(ox * s.stride + kx * s.dil) -
                                static_cast<long>(s.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(s.h) ||
                    ix >= static_cast<long>(s.w))
                  continue;
                const std::size_t cin_full = g * cig + ci;
                acc += x[((b * s.cin + cin_full) * s.h + iy) * s.w + ix] *
                       wt[((co * cig + ci) * s.k + ky) * s.k + kx];
              }
          y[((b * s.cout + co) * oh + oy) * ow + ox] = acc;
        }
  return y;
}

inline std::vector<long double> softmax(const std::vector<double>& row) {
  long double total = 0.0L;
  std::vector<long double> e(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    e[i] = std::exp(static_cast<long double>(row[i]));
    total += e[i];
  }
  for (auto& v : e) v /= total;
  return e;
}

// align_corners=false, one output pixel at a time.
inline double bilinear_at(const std::vector<double>& img, std::size_t h, std::size_t w,
                          std::size_t out_h, std::size_t out_w, std::size_t oy, std::size_t ox) {
  auto src = [](std::size_t o, std::size_t in, std::size_t out) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) /
                   static_cast<double>(out) -
               0.5;
    return s < 0.0 ? 0.0 : s;
  };
  const double sy = src(oy, h, out_h), sx = src(ox, w, out_w);
  const std::size_t y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ly = sy - y0, lx = sx - x0;
  return (1 - ly) * ((1 - lx) * img[y0 * w + x0] + lx * img[y0 * w + x1]) +
         ly * ((1 - lx) * img[y1 * w + x0] + lx * img[y1 * w + x1]);
}

inline double cross_entropy(const std::vector<double>& logits, std::size_t b, std::size_t k,
                            std::size_t hw, const std::vector<std::uint8_t>& target) {
  long double total = 0.0L;
  std::size_t counted = 0;
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t p = 0; p < hw; ++p) {
      const std::uint8_t t = target[n * hw + p];
      if (t == 255) continue;
      long double z = 0.0L;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(static_cast<long double>(logits[(n * k + c) * hw + p]));
      total += std::log(z) - logits[(n * k + t) * hw + p];
      ++counted;
    }
  return static_cast<double>(total / counted);
}

// Confusion counts by visiting each pixel.
inline std::vector<std::uint64_t> confusion(const tspkit::LabelMap& gt, const tspkit::LabelMap& pred,
                                            std::size_t k) {
  std::vector<std::uint64_t> cm(k * k, 0);
  for (std::size_t y = 0; y < gt.height; ++y)
    for (std::size_t x = 0; x < gt.width; ++x) {
      if (gt.at(x, y) == 255) continue;
      ++cm[gt.at(x, y) * k + pred.at(x, y)];
    }
  return cm;
}

// IoU from pixel-coordinate sets: |G ∩ P| / |G ∪ P| per class.
struct SetIou {
  std::vector<double> per_class;  // NaN when absent
  double mean;
};

inline SetIou set_iou(const tspkit::LabelMap& gt, const tspkit::LabelMap& pred, std::size_t k) {
  SetIou r;
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::set<std::size_t> g, p;
    for (std::size_t i = 0; i < gt.pixels.size(); ++i) {
      if (gt.pixels[i] == 255) continue;
      if (gt.pixels[i] == c) g.insert(i);
      if (pred.pixels[i] == c) p.insert(i);
    }
    std::set<std::size_t> inter, uni;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(),
                          std::inserter(inter, inter.begin()));
    std::set_union(g.begin(), g.end(), p.begin(), p.end(), std::inserter(uni, uni.begin()));
    if (uni.empty()) {
      r.per_class.push_back(std::nan(""));
      continue;
    }
    const double v = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    r.per_class.push_back(v);
    sum += v;
    ++present;
  }
  r.mean = present ? sum / static_cast<double>(present) : std::nan("");
  return r;
}

// Instance areas keyed by encoded id.
inline std::map<std::uint32_t, std::uint64_t> instance_areas(const tspkit::InstanceMap& inst) {
  std::map<std::uint32_t, std::uint64_t> a;
  for (std::uint32_t id : inst.pixels)
    if (id >= 1000) ++a[id];
  return a;
}

// Direct iIoU for one class over a list of images, weights avg/area.
inline double class_iiou(const std::vector<tspkit::LabelMap>& gts,
                         const std::vector<tspkit::InstanceMap>& insts,
                         const std::vector<tspkit::LabelMap>& preds, std::uint32_t c,
                         double avg_size) {
  long double itp = 0, ifn = 0, fp = 0;
  for (std::size_t n = 0; n < gts.size(); ++n) {
    const auto areas = instance_areas(insts[n]);
    for (std::size_t i = 0; i < gts[n].pixels.size(); ++i) {
      const std::uint8_t g = gts[n].pixels[i], p = preds[n].pixels[i];
      const std::uint32_t id = insts[n].pixels[i];
      if (g == 255) continue;
      if (g == c && id >= 1000 && id / 1000 == c) {
        const long double w = avg_size / static_cast<long double>(areas.at(id));
        (p == c ? itp : ifn) += w;
      } else if (g != c && p == c) {
        fp += 1;
      }
    }
  }
  return static_cast<double>(itp / (itp + fp + ifn));
}

}  // namespace oracle
