#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tspkit/drd.hpp"
#include "tspkit/grad_check.hpp"

namespace tspkit::drd {

struct DrdGradCheck {
  std::string stage;  // "fusion", "region_refine", "end_to_end"
  GradCheckReport report;
};

// Finite-difference checks of fusion_forward, region_refine_forward and
// drd_forward with freshly initialised parameters and random inputs. The
// end-to-end image is [1,3,image_size,image_size].
std::vector<DrdGradCheck> check_drd_gradients(const DrdConfig& config, std::uint64_t seed,
                                              std::size_t image_size,
                                              const GradCheckOptions& options);

}  // namespace tspkit::drd
