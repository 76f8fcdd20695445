#include "fluxsolve/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fluxsolve {

GradCheckReport grad_check(const ScalarFn& fn, const std::vector<ad::Parameter*>& params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  std::size_t total = 0;
  for (const auto* p : params) total += p->value.size();
  if (total == 0) return report;

  for (auto* p : params) p->zero_grad();
  {
    ad::Tape tape;
    auto loss = fn(tape);
    tape.backward(loss);
  }
  auto eval = [&] {
    ad::Tape tape;
    return fn(tape).item();
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t probe = 0; probe < options.probes; ++probe) {
    std::size_t flat = pick(rng);
    std::size_t k = 0;
    while (flat >= params[k]->value.size()) flat -= params[k++]->value.size();
    auto& x = params[k]->value.data[flat];
    const double saved = x;
    x = saved + options.step;
    const double fp = eval();
    x = saved - options.step;
    const double fm = eval();
    x = saved;
    const double fd = (fp - fm) / (2.0 * options.step);
    const double g = params[k]->grad.data[flat];
    const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), options.floor});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = params[k]->name;
      report.worst_index = flat;
    }
    ++report.probes;
  }
  report.flagged = report.max_rel_error > tol::gradcheck_flag;
  return report;
}

}  // namespace fluxsolve
