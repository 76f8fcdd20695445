#pragma once

#include <cstddef>
#include <vector>

#include "fluxsolve/tensor.hpp"

namespace fluxsolve {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments for a fixed, ordered list of parameters.
struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;
};

AdamState make_adam(const std::vector<ad::Parameter*>& params, AdamConfig config = {});

// One bias-corrected Adam update using each parameter's accumulated grad.
void adam_step(const std::vector<ad::Parameter*>& params, AdamState& state);

}  // namespace fluxsolve
