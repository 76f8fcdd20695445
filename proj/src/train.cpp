#include "fluxsolve/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "fluxsolve/json_io.hpp"
#include "fluxsolve/metrics.hpp"
#include "fluxsolve/optim.hpp"
#include "fluxsolve/tolerances.hpp"

namespace fluxsolve {

namespace {

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

struct Attempt {
  FluxGNNModel best, last;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  bool budget_exhausted = false;
};

bool strictly_decreasing(const std::vector<EpochLog>& log, std::size_t n) {
  for (std::size_t e = 1; e < log.size() && e <= n; ++e)
    if (!(log[e].train_loss < log[e - 1].train_loss)) return false;
  return true;
}

Attempt run(const FluxGNNModel& init, const DatasetSplits& data, const TrainConfig& cfg, double lr,
            std::size_t stop_after, std::chrono::steady_clock::time_point t0) {
  Attempt a;
  FluxGNNModel model = init;
  auto params = model.parameters();
  AdamState adam = make_adam(params, AdamConfig{lr});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.train.samples.size());
  std::iota(order.begin(), order.end(), 0);
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  double init_loss = 0.0;
  for (const auto& s : data.train.samples) init_loss += train_sample_loss(model, data.train, s, false);
  init_loss /= static_cast<double>(data.train.samples.size());
  a.log.push_back({0, init_loss, evaluate_model(model, data.val).mse, lr, elapsed()});
  a.best = model;
  a.best_val = a.log.back().val_mse;

  for (std::size_t epoch = 1; epoch <= std::min(cfg.epochs, stop_after); ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t k : order) {
      const Sample& s = data.train.samples[k];
      for (auto* p : params) p->zero_grad();
      double loss = 0.0;
      try {
        loss = train_sample_loss(model, data.train, s, true);
      } catch (const NumericalError& e) {
        throw NumericalError("training epoch " + std::to_string(epoch) + ", sample seed " +
                             std::to_string(s.seed) + ": " + e.what());
      }
      if (!std::isfinite(loss))
        throw NumericalError("training epoch " + std::to_string(epoch) + ", sample seed " +
                             std::to_string(s.seed) + ": non-finite loss");
      loss_sum += loss;
      adam_step(params, adam);
      model.refresh_decoder();
      if (model.decoder_identity_error() > tol::decoder_identity_rel)
        throw NumericalError("decoder no longer inverts the encoder after an update");
    }
    const double val = evaluate_model(model, data.val).mse;
    a.log.push_back({epoch, loss_sum / static_cast<double>(order.size()), val, lr, elapsed()});
    if (val < a.best_val) {
      a.best_val = val;
      a.best = model;
      a.best_epoch = epoch;
    }
    if (cfg.out_dir && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
      json_io::write_file(*cfg.out_dir / ("checkpoint_epoch_" + std::to_string(epoch) + ".json"),
                          model.to_json());
    if (elapsed() > cfg.time_budget_s && epoch < cfg.epochs) {
      a.budget_exhausted = true;
      break;
    }
  }
  a.last = std::move(model);
  return a;
}

}  // namespace

double identity_gate_residual(const FluxGNNModel& model, const Dataset& data, std::size_t steps) {
  if (data.samples.empty()) throw ConfigError("identity-gate check needs a sample");
  FluxGNNModel unit = model;
  unit.config.unit_gates = true;
  unit.config.bundle = 1;
  unit.config.solver = SolverConfig{};
  unit.f_vertex_j.reset();
  unit.config.unshared_vertex_mlp = false;
  const std::size_t w = unit.config.encoded_dim;
  unit.enc_u.value = Matrix(1, w, 1.0 / std::sqrt(static_cast<double>(w)));
  unit.enc_c.value = Matrix(1, w, 1.0);
  unit.enc_D.value = Matrix(1, w, 1.0);
  unit.refresh_decoder();
  const Sample& s = data.samples[0];
  const Problem p = problem_for(data, s, unit.config.u_ref);
  const auto a = rollout(unit, p, s.states[0], steps);
  const auto b = run_fvm(data.mesh, s.states[0], p.params, BoundaryConditions::none(), data.dt,
                         data.dt * static_cast<double>(steps), Scheme::Blended);
  double worst = 0.0;
  for (std::size_t t = 0; t < a.states.size(); ++t)
    for (std::size_t i = 0; i < a.states[t].size(); ++i)
      worst = std::max(worst, std::abs(a.states[t][i] - b.states[t][i]));
  return worst;
}

double train_sample_loss(FluxGNNModel& model, const Dataset& data, const Sample& s, bool backward) {
  ad::Tape tape;
  const Problem p = problem_for(data, s, model.config.u_ref);
  const auto pred = rollout_on_tape(tape, model, p, s.states[0], s.states.size() - 1);
  const ad::Tensor loss = mse_loss(pred, s.states);
  const double v = loss.item();
  if (backward) tape.backward(loss);
  return v;
}

TrainResult train(const FluxGNNModel& init, const DatasetSplits& data, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (data.train.samples.empty() || data.val.samples.empty()) throw ConfigError("empty training or validation split");
  const double residual = identity_gate_residual(init, data.train);
  if (residual > tol::fvm_equivalence_abs)
    throw NumericalError("identity-gate sanity check failed: max deviation from the blended FVM step " +
                         std::to_string(residual));

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r;
  r.lr = cfg.lr;
  Attempt a = run(init, data, cfg, cfg.lr, cfg.epochs, t0);
  if (cfg.allow_lr_retry && a.log.size() > 1 && !strictly_decreasing(a.log, cfg.monotone_epochs)) {
    r.lr_retried = true;
    r.lr = cfg.lr / 2.0;
    a = run(init, data, cfg, r.lr, cfg.epochs, t0);
  }
  r.best = std::move(a.best);
  r.last = std::move(a.last);
  r.log = std::move(a.log);
  r.best_epoch = a.best_epoch;
  r.best_val_mse = a.best_val;
  r.budget_exhausted = a.budget_exhausted;
  return r;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,train_loss,val_mse,lr,wall_s\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.6f\n", e.epoch, e.train_loss, e.val_mse, e.lr,
                  e.wall_s);
    os << buf;
  }
  return os.str();
}

}  // namespace fluxsolve
