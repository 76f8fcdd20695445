#include "fluxsolve/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fluxsolve {

AdamState make_adam(const std::vector<ad::Parameter*>& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto* p : params) {
    s.m.emplace_back(p->value.rows, p->value.cols);
    s.v.emplace_back(p->value.rows, p->value.cols);
  }
  return s;
}

void adam_step(const std::vector<ad::Parameter*>& params, AdamState& state) {
  if (params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter count differs from optimizer state");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto* p = params[k];
    if (!p->value.same_shape(state.m[k]) || !p->grad.same_shape(p->value))
      throw std::invalid_argument("adam_step: shape mismatch for '" + p->name + "'");
  }
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k]->value.data;
    const auto& grad = params[k]->grad.data;
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    for (std::size_t e = 0; e < value.size(); ++e) {
      m[e] = c.beta1 * m[e] + (1.0 - c.beta1) * grad[e];
      v[e] = c.beta2 * v[e] + (1.0 - c.beta2) * grad[e] * grad[e];
      value[e] -= c.lr * (m[e] / bc1) / (std::sqrt(v[e] / bc2) + c.eps);
    }
  }
}

}  // namespace fluxsolve
