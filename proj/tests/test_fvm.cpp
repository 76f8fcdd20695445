#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fluxsolve/exact.hpp"
#include "fluxsolve/fvm.hpp"
#include "fluxsolve/metrics.hpp"
#include "fluxsolve/tolerances.hpp"

using namespace fluxsolve;

namespace {

const double two_pi = 2.0 * std::numbers::pi;

std::vector<double> random_field(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

Mesh periodic(std::size_t n) { return build_interval_mesh(n, 1.0, IntervalBoundary::make_periodic()); }

}  // namespace

TEST(Exact, ClosedFormValues) {
  EXPECT_EQ(exact_solution(0.0, 0.0, 0.13, 1e-4, 1.0, 0.0), 1.0);
  EXPECT_NEAR(exact_solution(1.0, 0.0, 0.0, 1e-4, 1.0, 0.0), 0.996059940722142, 1e-15);
  for (double x : {0.0, 0.37, 0.81})
    EXPECT_NEAR(exact_solution(0.4, x, 0.2, 1e-4, 0.7, 0.3), exact_solution(0.4, x + 1.0, 0.2, 1e-4, 0.7, 0.3), 1e-14);
}

TEST(Interpolation, Central) {
  EXPECT_DOUBLE_EQ(interpolate_central(1.0, 3.0, {0.0}, {1.0}, {0.5}), 2.0);
  EXPECT_NEAR(interpolate_central(4.2, 4.2, {0.0, 0.0}, {1.0, 2.0}, {0.3, 0.6}), 4.2, 1e-15);
  EXPECT_DOUBLE_EQ(interpolate_central(0.0, 4.0, {0.0}, {1.0}, {0.25}), 1.0);
  EXPECT_THROW(interpolate_central(0.0, 1.0, {0.5}, {0.5}, {0.5}), std::invalid_argument);
}

TEST(Interpolation, UpwindAndTieRule) {
  EXPECT_EQ(interpolate_upwind(1.0, 2.0, {0.2}, {1.0}), 1.0);
  EXPECT_EQ(interpolate_upwind(1.0, 2.0, {-0.2}, {1.0}), 2.0);
  EXPECT_EQ(interpolate_upwind(1.0, 2.0, {0.0}, {1.0}), 1.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng);
    Vec c{u(rng), u(rng)}, n{u(rng), u(rng)};
    if (dot(c, n) == 0.0) continue;
    EXPECT_EQ(interpolate_upwind(a, b, c, n), interpolate_upwind(b, a, c, {-n[0], -n[1]}));
  }
}

TEST(Interpolation, FaceGradient) {
  EXPECT_NEAR(face_gradient_normal(1.0, 3.0, {0.1}), 20.0, 1e-12);
  EXPECT_EQ(face_gradient_normal(2.0, 2.0, {0.1}), 0.0);
  EXPECT_NEAR(face_gradient_normal(3.0, 1.0, {-0.1}), -20.0, 1e-12);
}

TEST(Boundary, DirichletAndNeumannSubstitution) {
  const Mesh m = build_interval_mesh(10, 1.0, IntervalBoundary::bounded(FaceKind::Dirichlet, FaceKind::Neumann));
  std::vector<double> u(10, 1.0);
  u[9] = 2.5;
  const auto bcs = BoundaryConditions::interval(m, 5.0, 0.0);
  const auto grad = apply_boundary_conditions(m, u, bcs, Term::Diffusion);
  const auto value = apply_boundary_conditions(m, u, bcs, Term::Convection);
  ASSERT_EQ(grad.size(), 2u);
  EXPECT_NEAR(grad[0], 80.0, 1e-12);
  EXPECT_EQ(grad[1], 0.0);
  EXPECT_EQ(value[0], 5.0);
  EXPECT_EQ(value[1], 2.5);
  EXPECT_THROW(BoundaryConditions::none().at(0), ConfigError);
}

TEST(Rhs, ConstantStateIsSteadyForEveryScheme) {
  const Mesh m = periodic(17);
  const std::vector<double> u(17, 0.7);
  for (Scheme s : {Scheme::Central, Scheme::Upwind, Scheme::Blended}) {
    TransportParams p{{0.3}, {}, 0.05};
    for (double r : fvm_rhs(m, u, p, BoundaryConditions::none(), s)) EXPECT_NEAR(r, 0.0, 1e-15);
  }
}

TEST(Rhs, SumsToZeroOnPeriodicMesh) {
  const Mesh m = periodic(23);
  const auto u = random_field(23, 2);
  for (Scheme s : {Scheme::Central, Scheme::Upwind, Scheme::Blended}) {
    const auto rhs = fvm_rhs(m, u, {{-0.17}, {}, 0.01}, BoundaryConditions::none(), s);
    double total = 0.0, mag = 0.0;
    for (double r : rhs) {
      total += r;
      mag += std::abs(r);
    }
    EXPECT_LE(std::abs(total), 1e-15 * std::max(mag, 1.0));
  }
}

TEST(Rhs, LocalConservationPerFace) {
  // Each face contributes -psi to its owner and +psi to its neighbor.
  const Mesh m = periodic(8);
  const auto u = random_field(8, 3);
  const TransportParams p{{0.2}, {}, 0.01};
  const auto psi = face_fluxes(m, u, p, BoundaryConditions::none(), Scheme::Blended);
  const auto rhs = fvm_rhs(m, u, p, BoundaryConditions::none(), Scheme::Blended);
  for (std::size_t i = 0; i < 8; ++i) {
    double expect = 0.0;
    for (std::size_t f = 0; f < m.n_faces(); ++f) {
      if (m.faces[f].owner == static_cast<long>(i)) expect -= psi[f];
      if (m.faces[f].neighbor == static_cast<long>(i)) expect += psi[f];
    }
    EXPECT_NEAR(rhs[i], expect, 1e-15);
  }
}

TEST(Rhs, DiffusionMatchesAnalyticLaplacian) {
  const std::size_t n = 100;
  const Mesh m = periodic(n);
  const double D = 1e-4;
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = std::cos(two_pi * m.cell_centroids[i][0]);
  const auto rhs = fvm_rhs(m, u, {{0.0}, {}, D}, BoundaryConditions::none(), Scheme::Blended);
  const double scale = m.cell_volumes[0] * two_pi * two_pi * D;
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(rhs[i], -scale * u[i], 1e-3 * scale);
}

TEST(Step, ZeroRhsAndConservation) {
  const Mesh m = periodic(10);
  const auto u = random_field(10, 4);
  EXPECT_EQ(step_explicit_euler(m, u, std::vector<double>(10, 0.0), 0.1), u);
  const TransportParams p{{0.2}, {}, 1e-3};
  std::vector<double> cur = u;
  const double m0 = total_mass(m, u);
  double scale = 0.0;
  for (std::size_t i = 0; i < 10; ++i) scale += m.cell_volumes[i] * std::abs(u[i]);
  for (int s = 0; s < 10; ++s) {
    const double before = total_mass(m, cur);
    cur = step_explicit_euler(m, cur, fvm_rhs(m, cur, p, BoundaryConditions::none(), Scheme::Blended), 0.1);
    EXPECT_LE(std::abs(total_mass(m, cur) - before), tol::fvm_step_drift_rel * scale);
  }
  EXPECT_LE(std::abs(total_mass(m, cur) - m0), tol::fvm_ten_step_drift_rel * scale);
}

TEST(Step, PureDecayFirstOrder) {
  const std::size_t n = 100;
  const Mesh m = periodic(n);
  const double D = 1e-4, dt = 0.1;
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = std::cos(two_pi * m.cell_centroids[i][0]);
  const auto next = step_explicit_euler(m, u, fvm_rhs(m, u, {{0.0}, {}, D}, BoundaryConditions::none(), Scheme::Central), dt);
  const double exact = std::exp(-two_pi * two_pi * D * dt);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(next[i], exact * u[i], 1e-5);
}

TEST(Run, StockGridTrajectory) {
  const Mesh m = periodic(10);
  const auto u = random_field(10, 5);
  const auto t = run_fvm(m, u, {{0.2}, {}, 1e-4}, BoundaryConditions::none(), 0.1, 1.0, Scheme::Blended);
  EXPECT_EQ(t.states.size(), 11u);
  EXPECT_NEAR(t.courant, 0.2, 1e-12);
  EXPECT_LE(conservation_error(m, t.states, 0.1), tol::run_conservation_abs);
  const auto still = run_fvm(m, u, {{0.0}, {}, 0.0}, BoundaryConditions::none(), 0.1, 1.0, Scheme::Upwind);
  for (const auto& s : still.states) EXPECT_EQ(s, u);
}

TEST(Run, RejectsBadInputs) {
  const Mesh m = periodic(10);
  const std::vector<double> u(10, 0.0);
  EXPECT_THROW(run_fvm(m, u, {{0.2}, {}, -1.0}, BoundaryConditions::none(), 0.1, 1.0, Scheme::Blended), ConfigError);
  EXPECT_THROW(run_fvm(m, u, {{0.2}, {}, 0.0}, BoundaryConditions::none(), 0.3, 1.0, Scheme::Blended), ConfigError);
  EXPECT_THROW(scheme_from_string("quick"), ConfigError);
}

TEST(Run, BlowUpReportsStep) {
  const Mesh m = periodic(10);
  std::vector<double> u(10, 0.0);
  u[3] = 1.0;
  try {
    run_fvm(m, u, {{0.0}, {}, 1e5}, BoundaryConditions::none(), 1.0, 400.0, Scheme::Central);
    FAIL() << "expected a numerical failure";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Convergence, MonotoneWithSlopeInRange) {
  const auto rows = convergence_study({5, 10, 20, 50, 100}, ConvergenceSetup{}, Scheme::Central);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LT(rows[k].rmse, rows[k - 1].rmse);
  const double slope = log_log_slope(rows);
  EXPECT_GE(slope, tol::convergence_slope_min);
  EXPECT_LE(slope, tol::convergence_slope_max);
  EXPECT_EQ(convergence_study({20}, ConvergenceSetup{}, Scheme::Central).size(), 1u);
}

TEST(Convergence, IdentityEvolutionIsExact) {
  ConvergenceSetup s;
  s.velocity = 0.0;
  s.diffusion = 0.0;
  for (const auto& r : convergence_study({5, 10, 20}, s, Scheme::Blended)) EXPECT_EQ(r.rmse, 0.0);
}

TEST(Convergence, CsvHeader) {
  const auto csv = convergence_csv(convergence_study({5, 10}, ConvergenceSetup{}, Scheme::Upwind));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_cells,dx,rmse");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Trajectory, JsonRoundTrip) {
  const Mesh m = periodic(10);
  auto t = run_fvm(m, random_field(10, 6), {{0.2}, {}, 1e-4}, BoundaryConditions::none(), 0.1, 0.5, Scheme::Blended);
  t.mesh_ref = "interval:10";
  const auto back = trajectory_from_json(trajectory_to_json(t));
  EXPECT_EQ(back.states, t.states);
  EXPECT_EQ(back.mesh_ref, t.mesh_ref);
  EXPECT_THROW(trajectory_from_json(nlohmann::json::object()), CorruptionError);
}
