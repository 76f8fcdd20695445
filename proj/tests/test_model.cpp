#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fluxsolve/model.hpp"
#include "fluxsolve/propcheck.hpp"
#include "fluxsolve/tolerances.hpp"

using namespace fluxsolve;
using ad::Tape;

namespace {

std::vector<double> random_field(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Model with gates far from constant, so every MLP matters.
FluxGNNModel varied_model(ModelConfig cfg, std::uint64_t seed) {
  auto m = FluxGNNModel::init(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto* p : m.parameters())
    if (p->name.find(".w") != std::string::npos)
      for (double& v : p->value.data) v = u(rng);
  return m;
}

double max_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double d = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) d = std::max(d, std::abs(a[t][i] - b[t][i]));
  return d;
}

double mass(const Mesh& mesh, const std::vector<double>& u) { return total_mass(mesh, u); }

FluxInputs row_inputs(Tape& t, std::size_t w, double ua, double ub, double c) {
  FluxInputs in;
  in.u_a = t.constant(Matrix(1, w, ua));
  in.u_b = t.constant(Matrix(1, w, ub));
  in.u_lin = t.constant(Matrix(1, w, 0.5 * (ua + ub)));
  in.u_up = t.constant(Matrix(1, w, c >= 0.0 ? ua : ub));
  in.velocity = t.constant(Matrix(1, w, c));
  in.diffusion = t.constant(Matrix(1, w, 1e-3));
  in.d_hat = Matrix::row({1.0});
  in.inv_dist = {10.0};
  in.sigma_u = in.sigma_flux = in.sigma_grad = {1.0};
  return in;
}

}  // namespace

TEST(Solver, ParseAndPrint) {
  EXPECT_EQ(SolverConfig::parse("explicit").kind, SolverKind::Explicit);
  const auto bb = SolverConfig::parse("bb:4");
  EXPECT_EQ(bb.kind, SolverKind::BarzilaiBorwein);
  EXPECT_EQ(bb.n_rep, 4u);
  EXPECT_EQ(bb.str(), "bb:4");
  for (const char* bad : {"bb:0", "bb:", "bb:x", "bb:2x", "rk4"})
    EXPECT_THROW(SolverConfig::parse(bad), ConfigError) << bad;
}

TEST(Encoding, DecodeInvertsEncode) {
  ModelConfig cfg;
  cfg.encoded_dim = 8;
  cfg.bundle = 2;
  auto model = FluxGNNModel::init(cfg, 1);
  model.enc_u.value = Matrix::row({2, 0, 0, 0, 0.5, -1, 3, 0.25});
  model.refresh_decoder();
  EXPECT_LE(model.decoder_identity_error(), 1e-15);
  Tape t;
  const auto m = bind(t, model);
  const auto h = encode_field(t.constant(Matrix::column({3.0, -1.5})), m);
  EXPECT_EQ(h.value()(0, 0), 6.0);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto d = decode_block(h, m, k).value();
    EXPECT_NEAR(d(0, 0), 3.0, 1e-15);
    EXPECT_NEAR(d(1, 0), -1.5, 1e-15);
  }
  model.enc_u.value = Matrix(1, 8);
  EXPECT_THROW(model.refresh_decoder(), NumericalError);
}

TEST(Flux, UnitGateInterpolationIsBlended) {
  ModelConfig cfg;
  cfg.encoded_dim = 4;
  cfg.unit_gates = true;
  auto model = FluxGNNModel::init(cfg, 2);
  Tape t;
  const auto m = bind(t, model);
  for (double c : {0.3, -0.3}) {
    const auto in = row_inputs(t, 4, 1.0, 3.0, c);
    const double up = c >= 0.0 ? 1.0 : 3.0;
    for (double v : flux_interp(in, model, m).value().data) EXPECT_NEAR(v, 0.375 * 4.0 + 0.25 * up, 1e-15);
  }
}

TEST(Flux, ZeroVelocityAndEqualStates) {
  auto model = varied_model({.encoded_dim = 4}, 3);
  Tape t;
  const auto m = bind(t, model);
  auto in = row_inputs(t, 4, 0.7, 0.7, 0.0);
  const auto f_int = flux_interp(in, model, m);
  for (double v : flux_convection(in, f_int, model, m).value().data) EXPECT_EQ(v, 0.0);
  for (double v : flux_gradient(in, model, m).value().data) EXPECT_EQ(v, 0.0);
}

TEST(Flux, PermutationInvariance) {
  auto model = varied_model({.encoded_dim = 8}, 4);
  const auto rep = check_permutation_invariance(model, 50, 5);
  EXPECT_TRUE(rep.passed) << rep.max_residual;
  EXPECT_TRUE(check_interp_invariance(model, 50, 5).passed);
  auto broken = varied_model({.encoded_dim = 8, .unshared_vertex_mlp = true}, 4);
  const auto bad = check_permutation_invariance(broken, 50, 5);
  EXPECT_FALSE(bad.passed);
  EXPECT_GT(bad.max_residual, 1e-6);
}

TEST(Layer, ZeroTransportLeavesStateUnchanged) {
  const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  auto model = varied_model({.encoded_dim = 8}, 6);
  Problem p{&mesh, {{0.0}, {}, 0.0}, BoundaryConditions::none(), 0.1, 1.0};
  const auto u = random_field(10, 7);
  const auto traj = rollout(model, p, u, 3);
  for (const auto& s : traj.states)
    for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(s[i], u[i], 1e-15);
}

TEST(Layer, ChannelTotalsConserved) {
  const Mesh mesh = build_interval_mesh_from_widths({0.1, 0.3, 0.05, 0.2, 0.15, 0.2},
                                                    IntervalBoundary::make_periodic());
  auto model = varied_model({.encoded_dim = 8}, 8);
  Problem p{&mesh, {{0.4}, {}, 1e-2}, BoundaryConditions::none(), 0.05, 1.0};
  const auto ctx = make_context(model, p);
  Tape t;
  const auto m = bind(t, model);
  const auto enc = encode_edges(t, m, ctx);
  const auto h = encode_field(t.constant(Matrix::column(random_field(6, 9))), m);
  const auto h1 = fluxgnn_layer(h, enc, ctx, model, m);
  for (std::size_t k = 0; k < 8; ++k) {
    double a = 0.0, b = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      a += mesh.cell_volumes[i] * h.value()(i, k);
      b += mesh.cell_volumes[i] * h1.value()(i, k);
      scale += mesh.cell_volumes[i] * std::abs(h.value()(i, k));
    }
    EXPECT_LE(std::abs(a - b), tol::graph_conservation_drift_rel * scale);
  }
}

TEST(Equivalence, UnitGatesReproduceBlendedScheme) {
  ModelConfig cfg;
  cfg.unit_gates = true;
  auto model = FluxGNNModel::init(cfg, 10);
  const auto u = random_field(10, 11);
  {
    const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
    const TransportParams tp{{0.2}, {}, 1e-4};
    const auto ref = run_fvm(mesh, u, tp, BoundaryConditions::none(), 0.1, 1.0, Scheme::Blended);
    const auto got = rollout(model, {&mesh, tp, BoundaryConditions::none(), 0.1, 1.0}, u, 10);
    EXPECT_LE(max_diff(ref.states, got.states), tol::fvm_equivalence_abs);
  }
  {
    const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::bounded(FaceKind::Dirichlet, FaceKind::Neumann));
    const auto bcs = BoundaryConditions::interval(mesh, 0.5, -0.3);
    const TransportParams tp{{-0.15}, {}, 2e-3};
    const auto ref = run_fvm(mesh, u, tp, bcs, 0.1, 1.0, Scheme::Blended);
    const auto got = rollout(model, {&mesh, tp, bcs, 0.1, 1.0}, u, 10);
    EXPECT_LE(max_diff(ref.states, got.states), tol::fvm_equivalence_abs);
  }
}

TEST(BB, ZeroIncrementIsFixedPoint) {
  Tape t;
  const auto h0 = t.constant(Matrix(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6}));
  BBTrace trace;
  const auto h = neural_nonlinear_solve(
      [&](const ad::Tensor& x) { return ad::scale(x, 0.0); }, h0, 5, &trace);
  EXPECT_EQ(h.value().data, h0.value().data);
  for (double r : trace.residual_norms) EXPECT_EQ(r, 0.0);
  EXPECT_EQ(trace.iterates.size(), 6u);
}

TEST(BB, LinearDecayConverges) {
  const auto r = check_bb_toy();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Bundle, SmoothingLimits) {
  Tape t;
  const auto prev = t.constant(Matrix::column({1.0, 1.0}));
  const std::vector<ad::Tensor> dec{t.constant(Matrix::column({2.0, 2.0})), t.constant(Matrix::column({4.0, 4.0}))};
  const auto one = bundle_smooth(prev, dec, t.constant(Matrix::scalar(1.0)));
  EXPECT_EQ(one[0].value()(0, 0), 2.0);
  EXPECT_EQ(one[1].value()(0, 0), 4.0);
  const auto zero = bundle_smooth(prev, dec, t.constant(Matrix::scalar(0.0)));
  EXPECT_EQ(zero[0].value()(0, 0), 1.0);
  EXPECT_EQ(zero[1].value()(0, 0), 2.0);
  const auto half = bundle_smooth(prev, dec, t.constant(Matrix::scalar(0.5)));
  EXPECT_EQ(half[1].value()(1, 0), 3.0);
}

TEST(Bundle, RolloutConservesMass) {
  const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  for (const char* solver : {"explicit", "bb:3"}) {
    ModelConfig cfg;
    cfg.bundle = 2;
    cfg.smoothing_layers = 2;
    cfg.solver = SolverConfig::parse(solver);
    auto model = varied_model(cfg, 12);
    model.smoothing.value = Matrix::row({0.7, 1.1});
    const auto u = random_field(10, 13);
    const auto traj = rollout(model, {&mesh, {{0.2}, {}, 1e-4}, BoundaryConditions::none(), 0.1, 1.0}, u, 5);
    ASSERT_EQ(traj.states.size(), 6u);
    for (const auto& s : traj.states) EXPECT_NEAR(mass(mesh, s), mass(mesh, u), 1e-13) << solver;
  }
}

TEST(Rollout, ZeroStepsReturnsInitialState) {
  const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  auto model = FluxGNNModel::init({}, 14);
  const auto u = random_field(10, 15);
  const auto traj = rollout(model, {&mesh, {{0.2}, {}, 1e-4}, BoundaryConditions::none(), 0.1, 1.0}, u, 0);
  ASSERT_EQ(traj.states.size(), 1u);
  EXPECT_EQ(traj.states[0], u);
  EXPECT_THROW(rollout(model, {&mesh, {{0.2}, {}, 1e-4}, BoundaryConditions::none(), 0.1, 1.0}, {1.0}, 1),
               ConfigError);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  ModelConfig cfg;
  cfg.solver = SolverConfig::parse("bb:2");
  auto model = varied_model(cfg, 16);
  auto back = FluxGNNModel::from_json(model.to_json());
  const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  const Problem p{&mesh, {{0.1}, {}, 1e-4}, BoundaryConditions::none(), 0.1, 1.0};
  const auto u = random_field(10, 17);
  EXPECT_EQ(rollout(model, p, u, 3).states, rollout(back, p, u, 3).states);
  EXPECT_EQ(back.config.solver.str(), "bb:2");

  auto j = model.to_json();
  j["decoder"]["values"][0] = j["decoder"]["values"][0].get<double>() * 1.01;
  EXPECT_THROW(FluxGNNModel::from_json(j), CorruptionError);
  auto k = model.to_json();
  k.erase("enc_u");
  EXPECT_THROW(FluxGNNModel::from_json(k), CorruptionError);
}
