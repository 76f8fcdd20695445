#include "fluxsolve/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fluxsolve {

namespace {

void check_shapes(const States& pred, const States& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("mse: " + std::to_string(pred.size()) + " predicted states vs " +
                                std::to_string(truth.size()) + " reference states");
  if (truth.size() < 2) throw std::invalid_argument("mse: need at least one step after t = 0");
  for (std::size_t t = 0; t < truth.size(); ++t)
    if (pred[t].size() != truth[t].size()) throw std::invalid_argument("mse: state length mismatch at step " + std::to_string(t));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Problem problem_for(const Dataset& data, const Sample& s, double u_ref) {
  Problem p;
  p.mesh = &data.mesh;
  p.params.velocity = Vec(static_cast<std::size_t>(data.mesh.dim), 0.0);
  p.params.velocity[0] = s.c;
  p.params.diffusion = s.D;
  p.dt = data.dt;
  p.u_ref = u_ref;
  return p;
}

EvalResult summarize(std::string method, const Dataset& data, std::vector<SampleMetrics> per, double wall) {
  EvalResult r;
  r.method = std::move(method);
  r.dataset = data.split;
  std::vector<double> m, c;
  for (const auto& s : per) {
    m.push_back(s.mse);
    c.push_back(s.cons_err);
  }
  std::tie(r.mse, r.mse_sem) = mean_sem(m);
  std::tie(r.cons_err, r.cons_err_sem) = mean_sem(c);
  r.wall_s = wall;
  r.per_sample = std::move(per);
  return r;
}

}  // namespace

double mse(const States& pred, const States& truth) {
  check_shapes(pred, truth);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 1; t < truth.size(); ++t)
    for (std::size_t i = 0; i < truth[t].size(); ++i) {
      const double d = pred[t][i] - truth[t][i];
      s += d * d;
      ++n;
    }
  return s / static_cast<double>(n);
}

ad::Tensor mse_loss(const std::vector<ad::Tensor>& pred, const States& truth) {
  if (pred.empty() || pred.size() + 1 != truth.size())
    throw std::invalid_argument("mse_loss: " + std::to_string(pred.size()) + " predicted steps vs " +
                                std::to_string(truth.size()) + " reference states");
  const std::size_t n = truth[0].size();
  Matrix ref(n, pred.size());
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].rows() != n || pred[t].cols() != 1 || truth[t + 1].size() != n)
      throw std::invalid_argument("mse_loss: state shape mismatch at step " + std::to_string(t + 1));
    for (std::size_t i = 0; i < n; ++i) ref(i, t) = truth[t + 1][i];
  }
  ad::Tape& tape = pred[0].tape();
  const ad::Tensor all = pred.size() == 1 ? pred[0] : ad::concat_cols(pred);
  const ad::Tensor diff = ad::sub(all, tape.constant(std::move(ref)));
  return ad::scale(ad::sum_all(ad::mul(diff, diff)), 1.0 / static_cast<double>(n * pred.size()));
}

double conservation_error(const Mesh& mesh, const States& states, double dt, bool signed_sum) {
  if (states.empty()) return 0.0;
  double err = 0.0;
  for (std::size_t t = 1; t < states.size(); ++t) {
    if (states[t].size() != mesh.n_cells())
      throw std::invalid_argument("conservation_error: state length does not match mesh");
    double drift = 0.0;
    for (std::size_t i = 0; i < states[t].size(); ++i)
      drift += mesh.cell_volumes[i] * (states[t][i] - states[0][i]);
    err += dt * (signed_sum ? drift : std::abs(drift));
  }
  return err;
}

std::pair<double, double> mean_sem(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

EvalResult evaluate_fvm(Scheme scheme, const Dataset& data) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<SampleMetrics> per(data.samples.size());
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < data.samples.size(); ++k) {
    const Sample& s = data.samples[k];
    const Problem p = problem_for(data, s, 1.0);
    const double t_max = data.dt * static_cast<double>(s.states.size() - 1);
    const auto traj = run_fvm(data.mesh, s.states[0], p.params, BoundaryConditions::none(), data.dt, t_max, scheme);
    per[k] = {s.seed, mse(traj.states, s.states), conservation_error(data.mesh, traj.states, data.dt)};
  }
  return summarize("fvm_" + to_string(scheme), data, std::move(per), seconds_since(t0));
}

EvalResult evaluate_model(FluxGNNModel& model, const Dataset& data, const std::string& method) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<SampleMetrics> per(data.samples.size());
  // Value-only rollouts read the parameters without modifying them.
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < data.samples.size(); ++k) {
    const Sample& s = data.samples[k];
    const Problem p = problem_for(data, s, model.config.u_ref);
    const auto traj = rollout(model, p, s.states[0], s.states.size() - 1);
    per[k] = {s.seed, mse(traj.states, s.states), conservation_error(data.mesh, traj.states, data.dt)};
  }
  return summarize(method, data, std::move(per), seconds_since(t0));
}

std::string metrics_csv(const std::vector<EvalResult>& rows) {
  std::ostringstream os;
  os << "method,dataset,mse,mse_sem,cons_err,cons_err_sem,wall_s\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g,%.17g,%.6f\n", r.method.c_str(),
                  r.dataset.c_str(), r.mse, r.mse_sem, r.cons_err, r.cons_err_sem, r.wall_s);
    os << buf;
  }
  return os.str();
}

nlohmann::json eval_to_json(const EvalResult& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : r.per_sample) per.push_back({{"seed", s.seed}, {"mse", s.mse}, {"cons_err", s.cons_err}});
  return {{"method", r.method}, {"dataset", r.dataset}, {"mse", r.mse},           {"mse_sem", r.mse_sem},
          {"cons_err", r.cons_err}, {"cons_err_sem", r.cons_err_sem}, {"wall_s", r.wall_s}, {"per_sample", per}};
}

}  // namespace fluxsolve
