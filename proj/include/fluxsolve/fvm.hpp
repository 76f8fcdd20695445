#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxsolve/mesh.hpp"

namespace fluxsolve {

enum class Scheme { Central, Upwind, Blended };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

// Velocity c (uniform vector, optionally overridden per face) and diffusion D >= 0.
struct TransportParams {
  Vec velocity{0.0};
  std::vector<Vec> face_velocity;  // empty => uniform
  double diffusion = 0.0;

  const Vec& velocity_at(std::size_t face) const {
    return face_velocity.empty() ? velocity : face_velocity[face];
  }
  double max_speed() const;
};

struct BoundaryCondition {
  FaceKind kind = FaceKind::Neumann;
  double value = 0.0;  // u-hat for Dirichlet, g-hat for Neumann
};

// One condition per boundary face, indexed by face id.
struct BoundaryConditions {
  std::vector<std::optional<BoundaryCondition>> by_face;

  static BoundaryConditions none() { return {}; }
  // Conditions for a bounded interval mesh: left and right end values, kinds
  // taken from the mesh face tags.
  static BoundaryConditions interval(const Mesh& mesh, double left_value, double right_value);
  const BoundaryCondition& at(std::size_t face) const;
};

enum class Term { Convection, Diffusion };

// Distance-weighted face value; arithmetic mean at the midpoint.
double interpolate_central(double u_i, double u_j, const Vec& x_i, const Vec& x_j, const Vec& x_ij);
// Donor-cell value: u_i when c.n >= 0, else u_j.
double interpolate_upwind(double u_i, double u_j, const Vec& c, const Vec& n);
// (u_j - u_i) / |d|
double face_gradient_normal(double u_i, double u_j, const Vec& d);

// Central-interpolation weights (w_i, w_j) for face f, periodic images resolved.
std::pair<double, double> central_weights(const Mesh& mesh, std::size_t face);

// Face value (convection) or normal gradient (diffusion) on each boundary
// face, in the order of mesh.boundary_faces().
std::vector<double> apply_boundary_conditions(const Mesh& mesh, const std::vector<double>& u,
                                              const BoundaryConditions& bcs, Term term);

// psi_f = S n.[c u_face - D grad u]_f, once per face from the owner's side.
std::vector<double> face_fluxes(const Mesh& mesh, const std::vector<double>& u,
                                const TransportParams& params, const BoundaryConditions& bcs,
                                Scheme scheme);

// d(V_i u_i)/dt = -sum_j psi_ij; owner gets -psi, neighbor +psi.
std::vector<double> fvm_rhs(const Mesh& mesh, const std::vector<double>& u,
                            const TransportParams& params, const BoundaryConditions& bcs,
                            Scheme scheme);

// u'_i = u_i + rhs_i dt / V_i
std::vector<double> step_explicit_euler(const Mesh& mesh, const std::vector<double>& u,
                                        const std::vector<double>& rhs, double dt);

double total_mass(const Mesh& mesh, const std::vector<double>& u);
double courant_number(const Mesh& mesh, const TransportParams& params, double dt);

struct Trajectory {
  std::string mesh_ref;
  double dt = 0.0;
  TransportParams params;
  std::vector<std::vector<double>> states;  // states[0] is the initial condition
  double courant = 0.0;
};

nlohmann::json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

// Number of steps t_max / dt; throws when t_max is not a multiple of dt.
std::size_t step_count(double t_max, double dt);

// Explicit Euler run; states has step_count(t_max, dt) + 1 entries.
// Throws NumericalError naming the step when a non-finite value appears.
Trajectory run_fvm(const Mesh& mesh, const std::vector<double>& init, const TransportParams& params,
                   const BoundaryConditions& bcs, double dt, double t_max, Scheme scheme);

struct ConvergenceSetup {
  double velocity = 0.2;
  double diffusion = 1e-4;
  double u_amp = 1.0;
  double x0 = 0.0;
  double t_end = 1.0;
  double courant = 0.2;
};

struct ConvergenceRow {
  std::size_t n_cells = 0;
  double dx = 0.0;
  double dt = 0.0;
  double rmse = 0.0;
  bool stable = true;
  std::string message;
};

// Periodic runs against the exact solution at t_end. dt per resolution gives
// the configured Courant number (with |c| = 0 the velocity scale is taken as 1).
std::vector<ConvergenceRow> convergence_study(const std::vector<std::size_t>& resolutions,
                                              const ConvergenceSetup& setup, Scheme scheme);

// Least-squares slope of log(rmse) against log(dx).
double log_log_slope(const std::vector<ConvergenceRow>& rows);

std::string convergence_csv(const std::vector<ConvergenceRow>& rows);

}  // namespace fluxsolve
