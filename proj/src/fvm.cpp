#include "fluxsolve/fvm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "fluxsolve/common.hpp"
#include "fluxsolve/exact.hpp"
#include "fluxsolve/kernels.hpp"

namespace fluxsolve {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Central: return "central";
    case Scheme::Upwind: return "upwind";
    case Scheme::Blended: return "blended";
  }
  return "blended";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "central") return Scheme::Central;
  if (s == "upwind") return Scheme::Upwind;
  if (s == "blended") return Scheme::Blended;
  throw ConfigError("unknown scheme '" + s + "' (expected central, upwind or blended)");
}

double exact_solution(double t, double x, double c, double D, double u_amp, double x0) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return u_amp * std::exp(-two_pi * two_pi * D * t) * std::cos(two_pi * (x - c * t + x0));
}

double TransportParams::max_speed() const {
  double m = norm(velocity);
  for (const auto& v : face_velocity) m = std::max(m, norm(v));
  return m;
}

BoundaryConditions BoundaryConditions::interval(const Mesh& mesh, double left_value,
                                                double right_value) {
  BoundaryConditions bcs;
  bcs.by_face.resize(mesh.n_faces());
  auto bf = mesh.boundary_faces();
  if (bf.size() != 2) throw ConfigError("BoundaryConditions::interval: mesh is not bounded");
  bcs.by_face[bf[0]] = BoundaryCondition{mesh.faces[bf[0]].kind, left_value};
  bcs.by_face[bf[1]] = BoundaryCondition{mesh.faces[bf[1]].kind, right_value};
  return bcs;
}

const BoundaryCondition& BoundaryConditions::at(std::size_t face) const {
  if (face >= by_face.size() || !by_face[face])
    throw ConfigError("boundary face " + std::to_string(face) + " has no condition");
  return *by_face[face];
}

double interpolate_central(double u_i, double u_j, const Vec& x_i, const Vec& x_j,
                           const Vec& x_ij) {
  Vec dij(x_i.size()), dj(x_i.size()), di(x_i.size());
  for (std::size_t k = 0; k < x_i.size(); ++k) {
    dij[k] = x_i[k] - x_j[k];
    dj[k] = x_ij[k] - x_j[k];
    di[k] = x_ij[k] - x_i[k];
  }
  const double len = norm(dij);
  if (!(len > 0.0)) throw std::invalid_argument("interpolate_central: coincident centroids");
  return norm(dj) / len * u_i + norm(di) / len * u_j;
}

double interpolate_upwind(double u_i, double u_j, const Vec& c, const Vec& n) {
  return dot(c, n) >= 0.0 ? u_i : u_j;
}

double face_gradient_normal(double u_i, double u_j, const Vec& d) {
  const double len = norm(d);
  if (!(len > 0.0)) throw std::invalid_argument("face_gradient_normal: zero-length d");
  return (u_j - u_i) / len;
}

namespace {

// x_ij expressed in the owner's unwrapped frame: on a periodic seam the face
// point is shifted by whole domain lengths along axis 0 to sit between x_i
// and x_i + d.
Vec face_point_image(const Mesh& mesh, const Face& f) {
  Vec p = f.centroid;
  if (f.kind != FaceKind::PeriodicSeam) return p;
  const auto& xi = mesh.cell_centroids[static_cast<std::size_t>(f.owner)];
  Vec xj(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) xj[k] = xi[k] + f.d[k];
  double best = INFINITY;
  Vec best_p = p;
  for (int shift = -1; shift <= 1; ++shift) {
    Vec q = p;
    q[0] += shift * mesh.length;
    Vec a(q.size()), b(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
      a[k] = q[k] - xi[k];
      b[k] = q[k] - xj[k];
    }
    const double score = norm(a) + norm(b);
    if (score < best) {
      best = score;
      best_p = q;
    }
  }
  return best_p;
}

}  // namespace

std::pair<double, double> central_weights(const Mesh& mesh, std::size_t face) {
  const auto& f = mesh.faces.at(face);
  if (f.is_boundary()) throw std::invalid_argument("central_weights: boundary face");
  const auto& xi = mesh.cell_centroids[static_cast<std::size_t>(f.owner)];
  Vec xj(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) xj[k] = xi[k] + f.d[k];
  const Vec p = face_point_image(mesh, f);
  // weights of u_i and u_j, evaluated through interpolate_central itself
  const double wi = interpolate_central(1.0, 0.0, xi, xj, p);
  const double wj = interpolate_central(0.0, 1.0, xi, xj, p);
  return {wi, wj};
}

std::vector<double> apply_boundary_conditions(const Mesh& mesh, const std::vector<double>& u,
                                              const BoundaryConditions& bcs, Term term) {
  std::vector<double> out;
  for (std::size_t fid : mesh.boundary_faces()) {
    const auto& f = mesh.faces[fid];
    const auto& bc = bcs.at(fid);
    const double ui = u.at(static_cast<std::size_t>(f.owner));
    const auto& xi = mesh.cell_centroids[static_cast<std::size_t>(f.owner)];
    Vec r(xi.size());
    for (std::size_t k = 0; k < xi.size(); ++k) r[k] = f.centroid[k] - xi[k];
    if (bc.kind == FaceKind::Dirichlet) {
      out.push_back(term == Term::Convection ? bc.value : (bc.value - ui) / norm(r));
    } else if (bc.kind == FaceKind::Neumann) {
      out.push_back(term == Term::Convection ? ui + bc.value * dot(r, f.normal) : bc.value);
    } else {
      throw ConfigError("boundary face " + std::to_string(fid) + " has a non-boundary condition");
    }
  }
  return out;
}

std::vector<double> face_fluxes(const Mesh& mesh, const std::vector<double>& u,
                                const TransportParams& params, const BoundaryConditions& bcs,
                                Scheme scheme) {
  if (u.size() != mesh.n_cells())
    throw std::invalid_argument("face_fluxes: field length does not match mesh");
  if (params.diffusion < 0.0) throw ConfigError("diffusion coefficient must be >= 0");
  if (static_cast<int>(params.velocity.size()) != mesh.dim)
    throw ConfigError("velocity dimension does not match mesh");
  if (!params.face_velocity.empty() && params.face_velocity.size() != mesh.n_faces())
    throw ConfigError("per-face velocity count does not match mesh");

  const auto bfaces = mesh.boundary_faces();
  std::vector<double> bc_value, bc_grad;
  if (!bfaces.empty()) {
    bc_value = apply_boundary_conditions(mesh, u, bcs, Term::Convection);
    bc_grad = apply_boundary_conditions(mesh, u, bcs, Term::Diffusion);
  }

  std::vector<double> psi(mesh.n_faces());
  std::size_t b = 0;
  for (std::size_t fid = 0; fid < mesh.n_faces(); ++fid) {
    const auto& f = mesh.faces[fid];
    const Vec& c = params.velocity_at(fid);
    const double cn = dot(c, f.normal);
    double u_face = 0.0, grad_n = 0.0;
    if (f.is_boundary()) {
      u_face = bc_value[b];
      grad_n = bc_grad[b];
      ++b;
    } else {
      const double ui = u[static_cast<std::size_t>(f.owner)];
      const double uj = u[static_cast<std::size_t>(f.neighbor)];
      const auto [wi, wj] = central_weights(mesh, fid);
      const double lin = wi * ui + wj * uj;
      const double up = interpolate_upwind(ui, uj, c, f.normal);
      switch (scheme) {
        case Scheme::Central: u_face = lin; break;
        case Scheme::Upwind: u_face = up; break;
        case Scheme::Blended: u_face = 0.25 * (ui + uj + lin + up); break;
      }
      grad_n = face_gradient_normal(ui, uj, f.d);
    }
    psi[fid] = f.area * (cn * u_face - params.diffusion * grad_n);
  }
  return psi;
}

std::vector<double> fvm_rhs(const Mesh& mesh, const std::vector<double>& u,
                            const TransportParams& params, const BoundaryConditions& bcs,
                            Scheme scheme) {
  const auto psi = face_fluxes(mesh, u, params, bcs, scheme);
  std::vector<long> owners(mesh.n_faces()), neighbors(mesh.n_faces());
  for (std::size_t f = 0; f < mesh.n_faces(); ++f) {
    owners[f] = mesh.faces[f].owner;
    neighbors[f] = mesh.faces[f].neighbor;
  }
  const auto inc = kernels::build_antisymmetric_incidence(owners, neighbors, mesh.n_cells());
  Matrix acc;
  kernels::scatter(inc, Matrix::column(psi), acc);
  std::vector<double> rhs(mesh.n_cells());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -acc.data[i];
  return rhs;
}

std::vector<double> step_explicit_euler(const Mesh& mesh, const std::vector<double>& u,
                                        const std::vector<double>& rhs, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    out[i] = u[i] + rhs[i] * dt / mesh.cell_volumes[i];
  return out;
}

double total_mass(const Mesh& mesh, const std::vector<double>& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += mesh.cell_volumes[i] * u[i];
  return s;
}

double courant_number(const Mesh& mesh, const TransportParams& params, double dt) {
  double min_dx = INFINITY;
  for (const auto& f : mesh.faces)
    if (!f.is_boundary()) min_dx = std::min(min_dx, norm(f.d));
  return params.max_speed() * dt / min_dx;
}

nlohmann::json trajectory_to_json(const Trajectory& t) {
  nlohmann::json params{{"c", t.params.velocity}, {"D", t.params.diffusion}};
  return {{"mesh_ref", t.mesh_ref}, {"dt", t.dt}, {"params", params}, {"states", t.states}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  try {
    t.mesh_ref = j.at("mesh_ref").get<std::string>();
    t.dt = j.at("dt").get<double>();
    t.params.velocity = j.at("params").at("c").get<Vec>();
    t.params.diffusion = j.at("params").at("D").get<double>();
    t.states = j.at("states").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("trajectory: ") + e.what());
  }
  return t;
}

std::size_t step_count(double t_max, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (t_max < 0.0) throw ConfigError("end time must be >= 0");
  const double ratio = t_max / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError("end time is not a multiple of the time step");
  return static_cast<std::size_t>(steps);
}

Trajectory run_fvm(const Mesh& mesh, const std::vector<double>& init, const TransportParams& params,
                   const BoundaryConditions& bcs, double dt, double t_max, Scheme scheme) {
  const std::size_t steps = step_count(t_max, dt);
  Trajectory traj;
  traj.mesh_ref = "interval:" + std::to_string(mesh.n_cells());
  traj.dt = dt;
  traj.params = params;
  traj.courant = courant_number(mesh, params, dt);
  traj.states.reserve(steps + 1);
  traj.states.push_back(init);
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto& u = traj.states.back();
    auto next = step_explicit_euler(mesh, u, fvm_rhs(mesh, u, params, bcs, scheme), dt);
    for (double v : next)
      if (!std::isfinite(v))
        throw NumericalError("run_fvm: non-finite value at step " + std::to_string(s));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

std::vector<ConvergenceRow> convergence_study(const std::vector<std::size_t>& resolutions,
                                              const ConvergenceSetup& setup, Scheme scheme) {
  if (resolutions.empty()) throw ConfigError("convergence_study: no resolutions given");
  std::vector<ConvergenceRow> rows;
  for (std::size_t n : resolutions) {
    ConvergenceRow row;
    row.n_cells = n;
    const Mesh mesh = build_interval_mesh(n, 1.0, IntervalBoundary::make_periodic());
    row.dx = 1.0 / static_cast<double>(n);
    const double speed = std::abs(setup.velocity) > 0.0 ? std::abs(setup.velocity) : 1.0;
    const auto steps =
        static_cast<std::size_t>(std::ceil(setup.t_end * speed / (setup.courant * row.dx) - 1e-9));
    row.dt = setup.t_end / static_cast<double>(std::max<std::size_t>(steps, 1));
    std::vector<double> init(n);
    for (std::size_t i = 0; i < n; ++i)
      init[i] = exact_solution(0.0, mesh.cell_centroids[i][0], setup.velocity, setup.diffusion,
                               setup.u_amp, setup.x0);
    TransportParams params{{setup.velocity}, {}, setup.diffusion};
    try {
      auto traj = run_fvm(mesh, init, params, BoundaryConditions::none(), row.dt, setup.t_end,
                          scheme);
      double se = 0.0;
      const auto& last = traj.states.back();
      for (std::size_t i = 0; i < n; ++i) {
        const double e = last[i] - exact_solution(setup.t_end, mesh.cell_centroids[i][0],
                                                  setup.velocity, setup.diffusion, setup.u_amp,
                                                  setup.x0);
        se += e * e;
      }
      row.rmse = std::sqrt(se / static_cast<double>(n));
    } catch (const NumericalError& e) {
      row.stable = false;
      row.rmse = NAN;
      row.message = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

double log_log_slope(const std::vector<ConvergenceRow>& rows) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows)
    if (r.stable && r.rmse > 0.0) pts.emplace_back(std::log(r.dx), std::log(r.rmse));
  if (pts.size() < 2) return NAN;
  double mx = 0, my = 0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0, sxx = 0;
  for (auto [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  return sxy / sxx;
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream os;
  os << "n_cells,dx,rmse\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.n_cells << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.dx);
    os << buf << ',';
    if (r.stable) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.rmse);
      os << buf;
    } else {
      os << "unstable";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace fluxsolve
