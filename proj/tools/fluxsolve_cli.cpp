#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "fluxsolve/dataset.hpp"
#include "fluxsolve/exact.hpp"
#include "fluxsolve/fvm.hpp"
#include "fluxsolve/json_io.hpp"
#include "fluxsolve/kernels.hpp"
#include "fluxsolve/manifest.hpp"
#include "fluxsolve/metrics.hpp"
#include "fluxsolve/model.hpp"
#include "fluxsolve/propcheck.hpp"
#include "fluxsolve/tolerances.hpp"
#include "fluxsolve/train.hpp"

namespace fs = std::filesystem;
using namespace fluxsolve;

namespace {

constexpr int kExitPropertyFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCorruption = 3;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> parse_resolutions(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    long v = -1;
    try {
      v = std::stol(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || tok.empty() || v < 2) throw ConfigError("invalid resolution '" + tok + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("no resolutions given");
  return out;
}

struct GenDataArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n_train = 100, n_val = 10, n_test = 10;
};

int cmd_gen_data(const GenDataArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  DatasetConfig cfg;
  cfg.seed = a.seed;
  cfg.n_train = a.n_train;
  cfg.n_val = a.n_val;
  cfg.n_test = a.n_test;
  const auto splits = generate_dataset(cfg);
  write_dataset(a.out, splits);
  RunManifest m;
  m.command = "gen-data";
  m.config = {{"n_train", a.n_train}, {"n_val", a.n_val}, {"n_test", a.n_test}, {"dx", cfg.dx},
              {"dt", cfg.dt},         {"t_max", cfg.t_max}, {"D", cfg.diffusion}};
  m.seeds = {a.seed};
  m.outputs = {"train.json", "val.json", "test.json"};
  m.wall_s = seconds_since(t0);
  write_manifest(a.out, m);
  std::printf("wrote %zu/%zu/%zu samples to %s\n", a.n_train, a.n_val, a.n_test, a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data, out, solver = "explicit";
  std::size_t epochs = 40, bundle = 1;
  double lr = 1e-3, budget_s = 1800.0;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!fs::is_directory(a.data)) throw ConfigError("data directory not found: " + a.data);
  const auto splits = read_dataset(a.data);
  ModelConfig mc;
  mc.solver = SolverConfig::parse(a.solver);
  mc.bundle = a.bundle;
  const FluxGNNModel init = FluxGNNModel::init(mc, a.seed);
  const fs::path out(a.out);
  RunManifest m;
  m.command = "train";
  m.config = {{"epochs", a.epochs}, {"lr", a.lr}, {"solver", a.solver}, {"bundle", a.bundle}, {"budget_s", a.budget_s}};
  m.seeds = {a.seed};
  m.input_hash = hash_inputs({fs::path(a.data) / "train.json", fs::path(a.data) / "val.json"});
  if (a.epochs == 0) {
    json_io::write_file(out / "checkpoint.json", init.to_json());
    m.outputs = {"checkpoint.json"};
    m.wall_s = seconds_since(t0);
    write_manifest(out, m);
    std::printf("epochs = 0: wrote the initial model to %s\n", (out / "checkpoint.json").c_str());
    return 0;
  }
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.lr = a.lr;
  tc.seed = a.seed;
  tc.time_budget_s = a.budget_s;
  tc.out_dir = out;
  const auto r = train(init, splits, tc);
  json_io::write_file(out / "checkpoint.json", r.best.to_json());
  json_io::write_file(out / "checkpoint_last.json", r.last.to_json());
  json_io::write_text(out / "training_log.csv", training_log_csv(r.log));
  m.config["lr_used"] = r.lr;
  m.config["lr_retried"] = r.lr_retried;
  m.config["best_epoch"] = r.best_epoch;
  m.config["budget_exhausted"] = r.budget_exhausted;
  m.outputs = {"checkpoint.json", "checkpoint_last.json", "training_log.csv"};
  m.wall_s = seconds_since(t0);
  write_manifest(out, m);
  std::printf("best epoch %zu, validation mse %.6e (epoch 0: %.6e)%s\n", r.best_epoch, r.best_val_mse,
              r.log.front().val_mse, r.lr_retried ? ", learning rate halved once" : "");
  return 0;
}

struct EvalArgs {
  std::string model, fvm, data, out, split = "test";
};

int cmd_eval(const EvalArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.model.empty() == a.fvm.empty()) throw ConfigError("give exactly one of --model or --fvm");
  if (!fs::is_directory(a.data)) throw ConfigError("data directory not found: " + a.data);
  const Dataset data = read_split(a.data, a.split);
  EvalResult r;
  RunManifest m;
  m.command = "eval";
  std::vector<fs::path> inputs{fs::path(a.data) / (a.split + ".json")};
  if (!a.fvm.empty()) {
    r = evaluate_fvm(scheme_from_string(a.fvm), data);
    m.config = {{"fvm", a.fvm}, {"split", a.split}};
  } else {
    if (!fs::is_regular_file(a.model)) throw ConfigError("checkpoint not found: " + a.model);
    FluxGNNModel model = FluxGNNModel::from_json(json_io::read_file(a.model));
    r = evaluate_model(model, data);
    m.config = {{"model", fs::path(a.model).filename().string()}, {"split", a.split}};
    inputs.push_back(a.model);
  }
  const std::string csv = metrics_csv({r});
  std::fputs(csv.c_str(), stdout);
  if (!a.out.empty()) {
    json_io::write_text(fs::path(a.out) / "metrics.csv", csv);
    json_io::write_file(fs::path(a.out) / "metrics.json", eval_to_json(r));
    m.input_hash = hash_inputs(inputs);
    m.outputs = {"metrics.csv", "metrics.json"};
    m.wall_s = seconds_since(t0);
    write_manifest(a.out, m);
  }
  return 0;
}

struct ConvergeArgs {
  std::string scheme = "central", resolutions = "5,10,20,50,100", out;
};

int cmd_converge(const ConvergeArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = convergence_study(parse_resolutions(a.resolutions), ConvergenceSetup{}, scheme_from_string(a.scheme));
  const std::string csv = convergence_csv(rows);
  std::fputs(csv.c_str(), stdout);
  for (const auto& r : rows)
    if (!r.stable) std::fprintf(stderr, "warning: n=%zu %s\n", r.n_cells, r.message.c_str());
  if (rows.size() >= 2) std::fprintf(stderr, "log-log slope %.4f\n", log_log_slope(rows));
  if (!a.out.empty()) {
    json_io::write_text(fs::path(a.out) / "convergence.csv", csv);
    RunManifest m;
    m.command = "converge";
    m.config = {{"scheme", a.scheme}, {"resolutions", a.resolutions}};
    m.outputs = {"convergence.csv"};
    m.wall_s = seconds_since(t0);
    write_manifest(a.out, m);
  }
  return 0;
}

struct PropcheckArgs {
  std::uint64_t seed = 0;
  std::size_t probes = 100;
  std::string inject_break;
};

int cmd_propcheck(const PropcheckArgs& a) {
  PropcheckConfig cfg;
  cfg.seed = a.seed;
  cfg.probes = a.probes;
  if (!a.inject_break.empty()) cfg.inject_break = a.inject_break;
  bool ok = true;
  for (const auto& r : run_propcheck(cfg)) {
    std::printf("%s %-30s max_residual=%.3e tol=%.1e%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.max_residual, r.tolerance, r.detail.empty() ? "" : "  ", r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitPropertyFailure;
}

struct RunFvmArgs {
  std::size_t n_cells = 10;
  double length = 1.0, c = 0.1, D = 1e-4, dt = 0.1, t_max = 1.0, u_amp = 1.0, x0 = 0.0;
  std::string scheme = "blended", out;
};

int cmd_run_fvm(const RunFvmArgs& a) {
  const Mesh mesh = build_interval_mesh(a.n_cells, a.length, IntervalBoundary::make_periodic());
  std::vector<double> init(mesh.n_cells());
  for (std::size_t i = 0; i < init.size(); ++i)
    init[i] = exact_solution(0.0, mesh.cell_centroids[i][0], a.c, a.D, a.u_amp, a.x0);
  TransportParams params{{a.c}, {}, a.D};
  auto traj = run_fvm(mesh, init, params, BoundaryConditions::none(), a.dt, a.t_max, scheme_from_string(a.scheme));
  traj.mesh_ref = "interval:" + std::to_string(a.n_cells);
  if (traj.courant > tol::courant_warn) std::fprintf(stderr, "warning: Courant number %.3f above 1\n", traj.courant);
  const auto j = trajectory_to_json(traj);
  if (a.out.empty())
    std::fputs(json_io::dump(j).c_str(), stdout);
  else
    json_io::write_file(a.out, j);
  std::fprintf(stderr, "mass drift %.3e, conservation error %.3e\n",
               total_mass(mesh, traj.states.back()) - total_mass(mesh, traj.states.front()),
               conservation_error(mesh, traj.states, a.dt));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conservative graph neural solver for convection-diffusion"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate exact-solution train/val/test splits");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--seed", gen.seed, "Base seed");
  c_gen->add_option("--n-train", gen.n_train, "Training samples");
  c_gen->add_option("--n-val", gen.n_val, "Validation samples");
  c_gen->add_option("--n-test", gen.n_test, "Test samples");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a generated dataset");
  c_train->add_option("--data", tr.data, "Dataset directory")->required();
  c_train->add_option("--out", tr.out, "Output directory")->required();
  c_train->add_option("--epochs", tr.epochs, "Epochs (0 writes the initial model)");
  c_train->add_option("--lr", tr.lr, "Adam learning rate");
  c_train->add_option("--seed", tr.seed, "Seed for initialization and shuffling");
  c_train->add_option("--solver", tr.solver, "explicit or bb:N");
  c_train->add_option("--bundle", tr.bundle, "Time steps predicted per forward pass");
  c_train->add_option("--budget-s", tr.budget_s, "Wall-clock budget in seconds");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint or an FVM scheme");
  auto* o_model = c_eval->add_option("--model", ev.model, "Checkpoint file");
  c_eval->add_option("--fvm", ev.fvm, "FVM scheme: central, upwind or blended")->excludes(o_model);
  c_eval->add_option("--data", ev.data, "Dataset directory")->required();
  c_eval->add_option("--out", ev.out, "Output directory");
  c_eval->add_option("--split", ev.split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));

  ConvergeArgs cv;
  auto* c_conv = app.add_subcommand("converge", "FVM convergence study against the exact solution");
  c_conv->add_option("--scheme", cv.scheme, "central, upwind or blended");
  c_conv->add_option("--resolutions", cv.resolutions, "Comma-separated cell counts");
  c_conv->add_option("--out", cv.out, "Output directory");

  PropcheckArgs pc;
  auto* c_prop = app.add_subcommand("propcheck", "Property checks: conservation, symmetry, equivariance, solver");
  c_prop->add_option("--seed", pc.seed, "Seed");
  c_prop->add_option("--probes", pc.probes, "Probes per check");
  c_prop->add_option("--inject-break", pc.inject_break, "Negative control (unshared-vertex-mlp)");

  RunFvmArgs rf;
  auto* c_fvm = app.add_subcommand("run-fvm", "Single periodic FVM run from the exact initial condition");
  c_fvm->add_option("--n-cells", rf.n_cells, "Cells");
  c_fvm->add_option("--length", rf.length, "Domain length");
  c_fvm->add_option("--c", rf.c, "Velocity");
  c_fvm->add_option("--D", rf.D, "Diffusion coefficient");
  c_fvm->add_option("--dt", rf.dt, "Time step");
  c_fvm->add_option("--t-max", rf.t_max, "End time");
  c_fvm->add_option("--u-amp", rf.u_amp, "Initial amplitude");
  c_fvm->add_option("--x0", rf.x0, "Initial phase shift");
  c_fvm->add_option("--scheme", rf.scheme, "central, upwind or blended");
  c_fvm->add_option("--out", rf.out, "Output JSON file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    kernels::configure_threads();
    if (c_gen->parsed()) return cmd_gen_data(gen);
    if (c_train->parsed()) return cmd_train(tr);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_conv->parsed()) return cmd_converge(cv);
    if (c_prop->parsed()) return cmd_propcheck(pc);
    if (c_fvm->parsed()) return cmd_run_fvm(rf);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const CorruptionError& e) {
    std::fprintf(stderr, "corrupt artifact: %s\n", e.what());
    return kExitCorruption;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitPropertyFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPropertyFailure;
  }
  return kExitConfig;
}
