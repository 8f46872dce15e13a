#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tspkit/tensor.hpp"

namespace tspkit {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-3;
  // 0 checks every entry; otherwise a seeded random subset per input.
  std::size_t max_probes_per_input = 0;
  std::uint64_t seed = 0;
  // Test hook applied to the analytic gradients before comparison.
  std::function<void(std::vector<std::vector<double>>&)> corrupt_analytic;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = false;
  std::vector<GradCheckEntry> inputs;
};

// Compares reverse-mode gradients of f against central differences. f must be
// a deterministic function of the given leaf tensors. Non-scalar outputs are
// reduced to a scalar with a fixed seeded random projection. Throws
// std::runtime_error when two evaluations at the same point disagree.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& inputs,
                           const GradCheckOptions& options = {});

}  // namespace tspkit
