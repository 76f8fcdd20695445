#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fluxsolve/tensor.hpp"
#include "fluxsolve/tolerances.hpp"

namespace fluxsolve {

// Builds a scalar loss on the given tape from the current parameter values.
using ScalarFn = std::function<ad::Tensor(ad::Tape&)>;

struct GradCheckOptions {
  std::size_t probes = 100;
  double step = tol::gradcheck_step;
  std::uint64_t seed = 0;
  double floor = tol::gradcheck_floor;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  bool flagged = false;  // max_rel_error above tol::gradcheck_flag

  bool passed(double threshold = tol::gradcheck_rel) const { return max_rel_error < threshold; }
};

// Compares reverse-mode gradients with central differences on randomly
// chosen (seeded) parameter coordinates. Relative error per probe is
// |g_ad - g_fd| / max(|g_ad|, |g_fd|, floor). Parameter values are restored.
GradCheckReport grad_check(const ScalarFn& fn, const std::vector<ad::Parameter*>& params,
                           const GradCheckOptions& options = {});

}  // namespace fluxsolve
