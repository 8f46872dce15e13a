#include "tspkit/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tspkit {

namespace {

class Projector {
 public:
  explicit Projector(std::uint64_t seed) : seed_(seed) {}

  Tensor scalarize(const Tensor& out) {
    if (out.numel() == 1) return out;
    ensure(out.shape());
    return sum(mul(out, weights_));
  }

  double value(const Tensor& out) {
    if (out.numel() == 1) return out.item();
    ensure(out.shape());
    auto o = out.data();
    auto w = weights_.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) acc += o[i] * w[i];
    return acc;
  }

 private:
  void ensure(const Shape& shape) {
    if (weights_.defined()) {
      if (weights_.shape() != shape) throw ShapeError("grad_check: output shape changed");
      return;
    }
    std::mt19937_64 rng(seed_ ^ 0x9e3779b97f4a7c15ULL);
    weights_ = Tensor::uniform(shape, rng, -1.0, 1.0);
  }

  std::uint64_t seed_;
  Tensor weights_;
};

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& inputs,
                           const GradCheckOptions& options) {
  for (const auto& [name, t] : inputs) {
    if (!t.is_leaf() || !t.requires_grad()) {
      throw GradError("grad_check: input '" + name + "' must be a gradient-tracked leaf");
    }
  }
  Projector projector(options.seed);

  Tensor first = f();
  Tensor second = f();
  if (first.shape() != second.shape() ||
      !std::equal(first.data().begin(), first.data().end(), second.data().begin())) {
    throw std::runtime_error("grad_check: function is not deterministic");
  }

  for (auto [name, t] : inputs) t.zero_grad();
  Tensor loss = projector.scalarize(first);
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& [name, t] : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }
  reset_grads(loss);
  for (auto [name, t] : inputs) t.zero_grad();
  if (options.corrupt_analytic) options.corrupt_analytic(analytic);

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k].second;
    std::vector<std::size_t> probes(t.numel());
    std::iota(probes.begin(), probes.end(), std::size_t{0});
    if (options.max_probes_per_input && probes.size() > options.max_probes_per_input) {
      std::shuffle(probes.begin(), probes.end(), rng);
      probes.resize(options.max_probes_per_input);
      std::sort(probes.begin(), probes.end());
    }
    GradCheckEntry entry{inputs[k].first, 0.0, probes.size()};
    auto values = t.mutable_data();
    for (std::size_t i : probes) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = projector.value(f());
      values[i] = original - options.step;
      const double minus = projector.value(f());
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(a - numeric) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.inputs.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace tspkit
