#include "fluxsolve/propcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fluxsolve/gradcheck.hpp"
#include "fluxsolve/metrics.hpp"
#include "fluxsolve/tolerances.hpp"

namespace fluxsolve {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

CheckResult finish(std::string name, double residual, double tolerance, std::string detail = {}) {
  return {std::move(name), residual, tolerance, residual <= tolerance, std::move(detail)};
}

// Stock model with MLP weights in +-0.5 and biases near zero, so the gates
// vary strongly with their inputs.
FluxGNNModel rich_model(const ModelConfig& cfg, std::mt19937_64& rng) {
  FluxGNNModel m = FluxGNNModel::init(cfg, rng());
  const std::size_t w = cfg.encoded_dim;
  for (MlpParams* p : {&m.f_vertex, &m.f_linear, &m.f_upwind, &m.f_conv, &m.f_grad})
    *p = MlpParams::init(p->w1.name.substr(0, p->w1.name.rfind('.')), w, w, w, rng, 0.5, 0.3);
  if (m.f_vertex_j) *m.f_vertex_j = MlpParams::init("f_vertex_j", w, w, w, rng, 0.5, 0.3);
  for (double& v : m.smoothing.value.data) v = uniform(rng, 0.3, 1.2);
  return m;
}

void randomize_encoders(FluxGNNModel& m, std::mt19937_64& rng) {
  const std::size_t bw = m.block_width();
  for (std::size_t k = 0; k < m.config.bundle; ++k) {
    const double scale = std::pow(10.0, uniform(rng, -6.0, 3.0));
    double n2 = 0.0;
    for (std::size_t c = k * bw; c < (k + 1) * bw; ++c) {
      m.enc_u.value.data[c] = uniform(rng, -1.0, 1.0);
      n2 += m.enc_u.value.data[c] * m.enc_u.value.data[c];
    }
    for (std::size_t c = k * bw; c < (k + 1) * bw; ++c) m.enc_u.value.data[c] *= scale / std::sqrt(n2);
  }
  for (double& v : m.enc_c.value.data) v = uniform(rng, -2.0, 2.0);
  for (double& v : m.enc_D.value.data) v = uniform(rng, 0.0, 2.0);
  m.refresh_decoder();
}

std::vector<double> random_field(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> u(n);
  for (double& v : u) v = uniform(rng, -1.0, 1.0);
  return u;
}

double abs_mass(const Mesh& mesh, const std::vector<double>& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += mesh.cell_volumes[i] * std::abs(u[i]);
  return s;
}

Problem interval_problem(const Mesh& mesh, double c, double D, double dt) {
  Problem p;
  p.mesh = &mesh;
  p.params.velocity = {c};
  p.params.diffusion = D;
  p.dt = dt;
  return p;
}

}  // namespace

Mesh random_graph_mesh(std::size_t n_cells, std::size_t n_extra_edges, int dim, std::mt19937_64& rng) {
  if (n_cells < 2) throw ConfigError("random graph needs at least two vertices");
  Mesh m;
  m.dim = dim;
  m.length = 1.0;
  m.boundary = "bounded";
  for (std::size_t i = 0; i < n_cells; ++i) {
    Vec x(static_cast<std::size_t>(dim));
    for (double& v : x) v = uniform(rng, 0.0, 1.0);
    m.cell_centroids.push_back(std::move(x));
    m.cell_volumes.push_back(uniform(rng, 0.1, 2.0));
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n_cells; ++i) edges.emplace_back(uniform_int(rng, 0, i - 1), i);
  for (std::size_t e = 0; e < n_extra_edges; ++e) {
    const std::size_t a = uniform_int(rng, 0, n_cells - 1), b = uniform_int(rng, 0, n_cells - 1);
    if (a == b) continue;
    const auto key = std::minmax(a, b);
    if (std::find_if(edges.begin(), edges.end(), [&](const auto& p) { return std::minmax(p.first, p.second) == key; }) !=
        edges.end())
      continue;
    edges.emplace_back(a, b);
  }
  for (const auto& [a, b] : edges) {
    Face f;
    f.owner = static_cast<long>(a);
    f.neighbor = static_cast<long>(b);
    f.area = uniform(rng, 0.1, 1.0);
    f.kind = FaceKind::Interior;
    Vec d(static_cast<std::size_t>(dim)), c(d.size()), n(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      d[k] = m.cell_centroids[b][k] - m.cell_centroids[a][k];
      c[k] = 0.5 * (m.cell_centroids[a][k] + m.cell_centroids[b][k]);
    }
    const double len = norm(d);
    for (std::size_t k = 0; k < d.size(); ++k) n[k] = d[k] / len;
    f.normal = n;
    f.centroid = c;
    f.d = d;
    m.faces.push_back(std::move(f));
  }
  return m;
}

CheckResult check_graph_conservation(std::uint64_t seed, std::size_t n_graphs) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const int dim = static_cast<int>(uniform_int(rng, 1, 3));
    const std::size_t n = uniform_int(rng, 2, 30);
    const Mesh mesh = random_graph_mesh(n, uniform_int(rng, 0, 2 * n), dim, rng);
    ModelConfig cfg;
    cfg.encoded_dim = 8;
    cfg.bundle = uniform_int(rng, 0, 1) ? 2 : 1;
    cfg.smoothing_layers = uniform_int(rng, 1, 2);
    if (uniform_int(rng, 0, 1)) cfg.solver = SolverConfig::parse("bb:3");
    FluxGNNModel model = rich_model(cfg, rng);
    randomize_encoders(model, rng);
    Problem p;
    p.mesh = &mesh;
    p.params.velocity = Vec(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t f = 0; f < mesh.n_faces(); ++f) {
      Vec c(static_cast<std::size_t>(dim));
      for (double& v : c) v = uniform(rng, -1.0, 1.0);
      p.params.face_velocity.push_back(std::move(c));
    }
    p.params.diffusion = uniform(rng, 0.0, 0.1);
    p.dt = 0.05;
    const auto init = random_field(n, rng);
    const auto traj = rollout(model, p, init, 3);
    const double m0 = total_mass(mesh, init);
    const double scale = abs_mass(mesh, init);
    for (const auto& s : traj.states) worst = std::max(worst, std::abs(total_mass(mesh, s) - m0) / scale);

    // Bare form: random antisymmetric messages, h' = h + sum of incoming messages.
    std::vector<long> owners, neighbors;
    for (const auto& f : mesh.faces) {
      owners.push_back(f.owner);
      neighbors.push_back(f.neighbor);
    }
    ad::Tape tape;
    Matrix h(n, 4), msg(mesh.n_faces(), 4);
    for (double& v : h.data) v = uniform(rng, -1.0, 1.0);
    for (double& v : msg.data) v = uniform(rng, -1.0, 1.0);
    const auto h1 = ad::add(tape.constant(h), ad::scatter_antisymmetric(tape.constant(msg), owners, neighbors, n));
    for (std::size_t k = 0; k < 4; ++k) {
      double before = 0.0, after = 0.0, mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        before += h(i, k);
        after += h1.value()(i, k);
        mag += std::abs(h(i, k));
      }
      worst = std::max(worst, std::abs(after - before) / mag);
    }
  }
  return finish("graph_conservation", worst, tol::graph_conservation_drift_rel,
                std::to_string(n_graphs) + " random graphs");
}

CheckResult check_linearity(std::uint64_t seed, std::size_t probes) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t p = 0; p < probes; ++p) {
    ModelConfig cfg;
    cfg.encoded_dim = 16;
    cfg.bundle = uniform_int(rng, 0, 1) ? 4 : 1;
    FluxGNNModel model = FluxGNNModel::init(cfg, rng());
    randomize_encoders(model, rng);
    ad::Tape tape;
    const BoundModel m = bind(tape, model);
    const std::size_t n = uniform_int(rng, 2, 20);
    const double a = uniform(rng, -2.0, 2.0), b = uniform(rng, -2.0, 2.0);
    const auto x = random_field(n, rng), y = random_field(n, rng);
    std::vector<double> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + b * y[i];
    const auto ex = encode_field(tape.constant(Matrix::column(x)), m);
    const auto ey = encode_field(tape.constant(Matrix::column(y)), m);
    const auto emix = encode_field(tape.constant(Matrix::column(mix)), m);
    double enc_scale = 0.0, enc_res = 0.0;
    for (std::size_t e = 0; e < emix.value().size(); ++e) {
      const double lin = a * ex.value().data[e] + b * ey.value().data[e];
      enc_res = std::max(enc_res, std::abs(emix.value().data[e] - lin));
      enc_scale = std::max(enc_scale, std::abs(a * ex.value().data[e]) + std::abs(b * ey.value().data[e]));
    }
    worst = std::max(worst, enc_res / std::max(enc_scale, 1e-300));
    // decode on random encoded states
    Matrix hx(n, cfg.encoded_dim), hy(n, cfg.encoded_dim), hm(n, cfg.encoded_dim);
    for (std::size_t e = 0; e < hx.size(); ++e) {
      hx.data[e] = uniform(rng, -1.0, 1.0);
      hy.data[e] = uniform(rng, -1.0, 1.0);
      hm.data[e] = a * hx.data[e] + b * hy.data[e];
    }
    const auto tx = tape.constant(hx), ty = tape.constant(hy), tm = tape.constant(hm);
    for (std::size_t k = 0; k < cfg.bundle; ++k) {
      const auto dx = decode_block(tx, m, k), dy = decode_block(ty, m, k), dm = decode_block(tm, m, k);
      double res = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        res = std::max(res, std::abs(dm.value().data[i] - (a * dx.value().data[i] + b * dy.value().data[i])));
        scale = std::max(scale, std::abs(a * dx.value().data[i]) + std::abs(b * dy.value().data[i]));
      }
      worst = std::max(worst, res / std::max(scale, 1e-300));
    }
  }
  return finish("linearity", worst, 1e-12, "encode and decode, relative");
}

CheckResult check_roundtrip(std::uint64_t seed, std::size_t probes) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t p = 0; p < probes; ++p) {
    ModelConfig cfg;
    cfg.encoded_dim = 64;
    const std::size_t bundles[] = {1, 2, 4, 8};
    cfg.bundle = bundles[uniform_int(rng, 0, 3)];
    FluxGNNModel model = FluxGNNModel::init(cfg, rng());
    randomize_encoders(model, rng);
    ad::Tape tape;
    const BoundModel m = bind(tape, model);
    const auto u = random_field(uniform_int(rng, 2, 50), rng);
    const auto h = encode_field(tape.constant(Matrix::column(u)), m);
    double scale = 0.0;
    for (double v : u) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < cfg.bundle; ++k) {
      const auto back = decode_block(h, m, k);
      for (std::size_t i = 0; i < u.size(); ++i)
        worst = std::max(worst, std::abs(back.value().data[i] - u[i]) / scale);
    }
  }
  return finish("roundtrip", worst, tol::roundtrip_rel, "encoder block norms in [1e-6, 1e3]");
}

CheckResult check_flux_symmetry(FluxGNNModel& model, std::uint64_t seed, std::size_t probes) {
  const auto rep = check_permutation_invariance(model, probes, seed);
  return finish("flux_symmetry", rep.max_residual, tol::flux_symmetry_abs,
                std::to_string(rep.probes) + " probes");
}

CheckResult check_scaling(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 10;
  const double length = 1.0, dt = 0.1;
  const double factors[][2] = {{2.0, 0.5}, {0.25, 4.0}, {8.0, 2.0}, {3.7, 0.3}};
  double worst = 0.0;
  for (const char* solver : {"explicit", "bb:3"}) {
    for (std::size_t bundle : {1, 2}) {
      ModelConfig cfg;
      cfg.solver = SolverConfig::parse(solver);
      cfg.bundle = bundle;
      FluxGNNModel model = rich_model(cfg, rng);
      const double c = uniform(rng, 0.05, 0.2), D = uniform(rng, 1e-4, 1e-2);
      const auto init = random_field(n, rng);
      const Mesh base = build_interval_mesh(n, length, IntervalBoundary::make_periodic());
      const auto ref = rollout(model, interval_problem(base, c, D, dt), init, 6);
      for (const auto& f : factors) {
        const double l = f[0], t = f[1];
        const Mesh scaled = build_interval_mesh(n, length * l, IntervalBoundary::make_periodic());
        const auto out = rollout(model, interval_problem(scaled, c * l / t, D * l * l / t, dt * t), init, 6);
        for (std::size_t s = 0; s < out.states.size(); ++s)
          for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(out.states[s][i] - ref.states[s][i]));
      }
    }
  }
  return finish("scaling_invariance", worst, tol::scaling_invariance_rel, "unit-scale field, absolute");
}

CheckResult check_reflection(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 10;
  double worst = 0.0;
  for (const char* solver : {"explicit", "bb:3"}) {
    for (std::size_t bundle : {1, 2}) {
      ModelConfig cfg;
      cfg.solver = SolverConfig::parse(solver);
      cfg.bundle = bundle;
      FluxGNNModel model = rich_model(cfg, rng);
      // c = 0 is excluded: the donor tie rule picks the owner, which is not mirror symmetric.
      const double c = uniform(rng, 0.05, 0.2) * (uniform_int(rng, 0, 1) ? 1.0 : -1.0);
      const double D = uniform(rng, 1e-4, 1e-2);
      const Mesh mesh = build_interval_mesh(n, 1.0, IntervalBoundary::make_periodic());
      const auto init = random_field(n, rng);
      std::vector<double> mirrored(init.rbegin(), init.rend());
      const auto a = rollout(model, interval_problem(mesh, c, D, 0.1), init, 6);
      const auto b = rollout(model, interval_problem(mesh, -c, D, 0.1), mirrored, 6);
      for (std::size_t s = 0; s < a.states.size(); ++s)
        for (std::size_t i = 0; i < n; ++i)
          worst = std::max(worst, std::abs(a.states[s][i] - b.states[s][n - 1 - i]));
    }
  }
  return finish("reflection_invariance", worst, tol::reflection_invariance_abs);
}

CheckResult check_en_equivariance(std::uint64_t seed, std::size_t n_transforms) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (std::size_t dim : {2, 3}) {
    MlpParams mlp = MlpParams::init("f_en", 1, 16, 1, rng, 0.5, 0.3);
    for (std::size_t t = 0; t < n_transforms; ++t) {
      // Gram-Schmidt on a Gaussian matrix; a random sign flip makes it a reflection half the time.
      Matrix q(dim, dim);
      for (double& v : q.data) v = gauss(rng);
      for (std::size_t c = 0; c < dim; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
          double d = 0.0;
          for (std::size_t r = 0; r < dim; ++r) d += q(r, c) * q(r, p);
          for (std::size_t r = 0; r < dim; ++r) q(r, c) -= d * q(r, p);
        }
        double nn = 0.0;
        for (std::size_t r = 0; r < dim; ++r) nn += q(r, c) * q(r, c);
        for (std::size_t r = 0; r < dim; ++r) q(r, c) /= std::sqrt(nn);
      }
      if (uniform_int(rng, 0, 1))
        for (std::size_t r = 0; r < dim; ++r) q(r, 0) = -q(r, 0);
      Matrix h(8, dim);
      for (double& v : h.data) v = uniform(rng, -2.0, 2.0);
      ad::Tape tape;
      const BoundMlp bm = bind(tape, mlp);
      const auto qc = tape.constant(q);
      const auto lhs = f_en(ad::linear(tape.constant(h), qc), bm);
      const auto rhs = ad::linear(f_en(tape.constant(h), bm), qc);
      for (std::size_t e = 0; e < lhs.value().size(); ++e)
        worst = std::max(worst, std::abs(lhs.value().data[e] - rhs.value().data[e]));
    }
  }
  return finish("en_equivariance", worst, tol::en_equivariance_abs,
                std::to_string(n_transforms) + " transforms in 2-D and 3-D");
}

CheckResult check_bb_conservation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> widths(12);
    for (double& w : widths) w = uniform(rng, 0.02, 0.15);
    const Mesh mesh = build_interval_mesh_from_widths(widths, IntervalBoundary::make_periodic());
    ModelConfig cfg;
    cfg.encoded_dim = 16;
    cfg.bundle = trial % 2 ? 2 : 1;
    FluxGNNModel model = rich_model(cfg, rng);
    randomize_encoders(model, rng);
    const Problem p = interval_problem(mesh, uniform(rng, -0.5, 0.5), uniform(rng, 0.0, 0.01), 0.1);
    const LayerContext ctx = make_context(model, p);
    ad::Tape tape;
    const BoundModel m = bind(tape, model);
    const EncodedEdges enc = encode_edges(tape, m, ctx);
    const auto h0 = encode_field(tape.constant(Matrix::column(random_field(mesh.n_cells(), rng))), m);
    BBTrace trace;
    neural_nonlinear_solve([&](const ad::Tensor& h) { return layer_increment(h, enc, ctx, model, m); }, h0, 8,
                           &trace);
    const Matrix& first = trace.iterates.front();
    for (std::size_t k = 0; k < first.cols; ++k) {
      double t0 = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < first.rows; ++i) {
        t0 += mesh.cell_volumes[i] * first(i, k);
        scale += mesh.cell_volumes[i] * std::abs(first(i, k));
      }
      for (const auto& it : trace.iterates) {
        double t = 0.0;
        for (std::size_t i = 0; i < it.rows; ++i) t += mesh.cell_volumes[i] * it(i, k);
        worst = std::max(worst, std::abs(t - t0) / scale);
      }
    }
  }
  return finish("bb_iterate_conservation", worst, tol::bb_conservation_rel, "8 iterates, relative per channel");
}

CheckResult check_bb_toy() {
  const std::size_t rows = 6, cols = 3;
  const double dt = 0.1;
  Matrix h0(rows, cols), rate(rows, cols), fixed(rows, cols);
  for (std::size_t e = 0; e < h0.size(); ++e) {
    h0.data[e] = 1.0 + 0.1 * static_cast<double>(e);
    rate.data[e] = 0.5 + 0.25 * static_cast<double>(e % 5);
    fixed.data[e] = h0.data[e] / (1.0 + rate.data[e] * dt);
  }
  Matrix neg_rate_dt = rate;
  for (double& v : neg_rate_dt.data) v *= -dt;
  ad::Tape tape;
  const auto h = tape.constant(h0);
  const auto k = tape.constant(neg_rate_dt);
  BBTrace trace;
  const auto out = neural_nonlinear_solve([&](const ad::Tensor& x) { return ad::mul(x, k); }, h, 8, &trace);
  double err0 = 0.0, err = 0.0;
  for (std::size_t e = 0; e < h0.size(); ++e) {
    err0 = std::max(err0, std::abs(h0.data[e] - fixed.data[e]));
    err = std::max(err, std::abs(out.value().data[e] - fixed.data[e]));
  }
  // worst ratio of consecutive residual norms; below 1 means strictly decreasing
  double ratio = 0.0;
  for (std::size_t i = 1; i < trace.residual_norms.size(); ++i)
    ratio = std::max(ratio, trace.residual_norms[i] / trace.residual_norms[i - 1]);
  std::ostringstream os;
  os << "residual " << trace.residual_norms.front() << " -> " << trace.residual_norms.back()
     << ", distance to fixed point " << err0 << " -> " << err;
  CheckResult r{"bb_linear_decay", ratio, 1.0, ratio < 1.0 && err < err0, os.str()};
  return r;
}

namespace {

struct OpCase {
  const char* name;
  std::vector<ad::Parameter> params;
  std::function<ad::Tensor(ad::Tape&, std::vector<ad::Tensor>&)> body;
};

ad::Parameter rand_param(const char* name, std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                         double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = uniform(rng, lo, hi);
  return ad::Parameter(name, m);
}

CheckResult run_case(OpCase& oc, std::mt19937_64& rng, std::size_t probes) {
  // weighted sum against a fixed random matrix makes every output entry matter
  std::vector<ad::Parameter*> ptrs;
  for (auto& p : oc.params) ptrs.push_back(&p);
  std::optional<Matrix> weights;
  const std::uint64_t wseed = rng();
  auto fn = [&](ad::Tape& tape) {
    std::vector<ad::Tensor> in;
    for (auto* p : ptrs) in.push_back(tape.parameter(*p));
    const auto y = oc.body(tape, in);
    if (!weights) {
      std::mt19937_64 wr(wseed);
      weights = Matrix(y.rows(), y.cols());
      for (double& v : weights->data) v = uniform(wr, -1.0, 1.0);
    }
    return ad::sum_all(ad::mul(y, tape.constant(*weights)));
  };
  GradCheckOptions opt;
  opt.probes = probes;
  opt.seed = rng();
  const auto rep = grad_check(fn, ptrs, opt);
  return finish(std::string("grad_") + oc.name, rep.max_rel_error, tol::gradcheck_rel,
                rep.worst_param.empty() ? "" : "worst " + rep.worst_param);
}

}  // namespace

std::vector<CheckResult> autodiff_suite(std::uint64_t seed, std::size_t probes) {
  std::mt19937_64 rng(seed);
  std::vector<OpCase> cases;
  auto P = [&](const char* n, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    return rand_param(n, r, c, rng, lo, hi);
  };
  const std::vector<double> factors{0.5, -1.5, 2.0, 0.25};
  Matrix dirs(4, 2);
  for (double& v : dirs.data) v = uniform(rng, -1.0, 1.0);
  const std::vector<std::size_t> gidx{3, 0, 0, 2, 1};
  const std::vector<long> owners{0, 1, 2, 3, 0}, neighbors{1, 2, 3, 0, -1};
  const auto inc = kernels::build_incidence(std::vector<long>{2, 0, 1, 2}, std::vector<double>{1.0, -1.0, 0.5, 2.0}, 3);

  cases.push_back({"linear", {P("x", 4, 3), P("w", 3, 5)}, [](ad::Tape&, auto& in) { return ad::linear(in[0], in[1]); }});
  cases.push_back({"linear_bias", {P("x", 4, 3), P("w", 3, 5), P("b", 1, 5)},
                   [](ad::Tape&, auto& in) { return ad::linear(in[0], in[1], in[2]); }});
  cases.push_back({"transpose", {P("x", 4, 3)}, [](ad::Tape&, auto& in) { return ad::transpose(in[0]); }});
  cases.push_back({"add", {P("a", 4, 3), P("b", 4, 3)}, [](ad::Tape&, auto& in) { return ad::add(in[0], in[1]); }});
  cases.push_back({"sub", {P("a", 4, 3), P("b", 4, 3)}, [](ad::Tape&, auto& in) { return ad::sub(in[0], in[1]); }});
  cases.push_back({"mul", {P("a", 4, 3), P("b", 4, 3)}, [](ad::Tape&, auto& in) { return ad::mul(in[0], in[1]); }});
  cases.push_back({"scale", {P("x", 4, 3)}, [](ad::Tape&, auto& in) { return ad::scale(in[0], -1.7); }});
  cases.push_back({"scale_rows", {P("x", 4, 3)}, [factors](ad::Tape&, auto& in) { return ad::scale_rows(in[0], factors); }});
  cases.push_back({"tanh", {P("x", 4, 3, -2.0, 2.0)}, [](ad::Tape&, auto& in) { return ad::tanh(in[0]); }});
  cases.push_back({"group_norm", {P("x", 4, 6, 0.2, 1.0)}, [](ad::Tape&, auto& in) { return ad::group_norm(in[0], 2); }});
  cases.push_back({"l2_norm_rows", {P("x", 4, 3, 0.2, 1.0)}, [](ad::Tape&, auto& in) { return ad::l2_norm_rows(in[0]); }});
  cases.push_back({"gate_groups", {P("g", 4, 3), P("x", 4, 6)},
                   [](ad::Tape&, auto& in) { return ad::gate_groups(in[0], in[1], 2); }});
  cases.push_back({"expand_groups", {P("x", 4, 3)}, [dirs](ad::Tape&, auto& in) { return ad::expand_groups(in[0], dirs); }});
  cases.push_back({"contract_groups", {P("x", 4, 6)}, [dirs](ad::Tape&, auto& in) { return ad::contract_groups(in[0], dirs); }});
  cases.push_back({"concat_cols", {P("a", 4, 2), P("b", 4, 3)},
                   [](ad::Tape&, auto& in) { return ad::concat_cols({in[0], in[1]}); }});
  cases.push_back({"concat_rows", {P("a", 2, 3), P("b", 4, 3)},
                   [](ad::Tape&, auto& in) { return ad::concat_rows({in[0], in[1]}); }});
  cases.push_back({"slice_cols", {P("x", 4, 5)}, [](ad::Tape&, auto& in) { return ad::slice_cols(in[0], 1, 4); }});
  cases.push_back({"gather_rows", {P("x", 4, 3)}, [gidx](ad::Tape&, auto& in) { return ad::gather_rows(in[0], gidx); }});
  cases.push_back({"scatter", {P("x", 4, 3)}, [inc](ad::Tape&, auto& in) { return ad::scatter(in[0], inc); }});
  cases.push_back({"scatter_add_rows", {P("x", 5, 3)},
                   [owners](ad::Tape&, auto& in) { return ad::scatter_add_rows(in[0], owners, 4); }});
  cases.push_back({"scatter_antisymmetric", {P("x", 5, 3)}, [owners, neighbors](ad::Tape&, auto& in) {
                     return ad::scatter_antisymmetric(in[0], owners, neighbors, 4);
                   }});
  cases.push_back({"sum_all", {P("x", 4, 3)}, [](ad::Tape&, auto& in) { return ad::sum_all(in[0]); }});
  cases.push_back({"div_scalar", {P("x", 4, 3), P("s", 1, 1, 0.5, 2.0)},
                   [](ad::Tape&, auto& in) { return ad::div_scalar(in[0], in[1]); }});
  cases.push_back({"mul_scalar", {P("x", 4, 3), P("s", 1, 1)},
                   [](ad::Tape&, auto& in) { return ad::mul_scalar(in[0], in[1]); }});
  const std::vector<double> sig{0.5, 1.0, 2.0, 0.8};
  cases.push_back({"f_sim", {P("h", 4, 6), P("w1", 3, 5, -0.5, 0.5), P("b1", 1, 5), P("w2", 5, 3, -0.5, 0.5), P("b2", 1, 3)},
                   [sig](ad::Tape&, auto& in) { return f_sim(in[0], sig, BoundMlp{in[1], in[2], in[3], in[4]}, 2); }});
  cases.push_back({"f_en", {P("h", 4, 3), P("w1", 1, 5, -0.5, 0.5), P("b1", 1, 5), P("w2", 5, 1, -0.5, 0.5), P("b2", 1, 1)},
                   [](ad::Tape&, auto& in) { return f_en(in[0], BoundMlp{in[1], in[2], in[3], in[4]}); }});

  std::vector<CheckResult> out;
  for (auto& oc : cases) out.push_back(run_case(oc, rng, probes));

  // Composed flux function and full rollouts through the model parameters.
  const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  const auto init = random_field(10, rng);
  const auto target = random_field(10, rng);
  struct Composite {
    const char* name;
    ModelConfig cfg;
  };
  std::vector<Composite> composites;
  {
    ModelConfig c;
    c.encoded_dim = 8;
    composites.push_back({"flux_rollout_explicit", c});
    c.solver = SolverConfig::parse("bb:3");
    c.bundle = 2;
    composites.push_back({"flux_rollout_bb_bundled", c});
  }
  for (auto& comp : composites) {
    FluxGNNModel model = rich_model(comp.cfg, rng);
    randomize_encoders(model, rng);
    const double scale = std::pow(10.0, -uniform(rng, 0.0, 1.0));
    for (double& v : model.enc_u.value.data) v = std::copysign(std::max(std::abs(v), 1e-2), v) * scale;
    model.refresh_decoder();
    const Problem p = interval_problem(mesh, 0.15, 1e-3, 0.1);
    States truth{init};
    for (int t = 0; t < 3; ++t) truth.push_back(target);
    auto fn = [&](ad::Tape& tape) { return mse_loss(rollout_on_tape(tape, model, p, init, 3), truth); };
    GradCheckOptions opt;
    opt.probes = probes;
    opt.seed = rng();
    const auto rep = grad_check(fn, model.parameters(), opt);
    out.push_back(finish(std::string("grad_") + comp.name, rep.max_rel_error, tol::gradcheck_rel,
                         rep.worst_param.empty() ? "" : "worst " + rep.worst_param));
  }
  {
    ModelConfig c;
    c.encoded_dim = 8;
    FluxGNNModel model = rich_model(c, rng);
    const std::size_t rows = 5, dim = 2, w = c.encoded_dim;
    auto rnd = [&](std::size_t r, std::size_t cc, double lo = -1.0) {
      Matrix m(r, cc);
      for (double& v : m.data) v = uniform(rng, lo, 1.0);
      return m;
    };
    const Matrix ua = rnd(rows, w), ub = rnd(rows, w), ul = rnd(rows, w), uu = rnd(rows, w), vel = rnd(rows, dim * w),
                 dif = rnd(rows, w, 0.0), dh = rnd(rows, dim);
    auto fn = [&](ad::Tape& tape) {
      const BoundModel m = bind(tape, model);
      FluxInputs in;
      in.u_a = tape.constant(ua);
      in.u_b = tape.constant(ub);
      in.u_lin = tape.constant(ul);
      in.u_up = tape.constant(uu);
      in.velocity = tape.constant(vel);
      in.diffusion = tape.constant(dif);
      in.d_hat = dh;
      in.inv_dist.assign(rows, 3.0);
      in.sigma_u.assign(rows, 1.0);
      in.sigma_flux.assign(rows, 0.7);
      in.sigma_grad.assign(rows, 1.3);
      const auto f = flux_function(in, model, m);
      return ad::sum_all(ad::mul(f, f));
    };
    GradCheckOptions opt;
    opt.probes = probes;
    opt.seed = rng();
    const auto rep = grad_check(fn, model.parameters(), opt);
    out.push_back(finish("grad_flux_function", rep.max_rel_error, tol::gradcheck_rel,
                         rep.worst_param.empty() ? "" : "worst " + rep.worst_param));
  }
  return out;
}

std::vector<CheckResult> run_propcheck(const PropcheckConfig& cfg) {
  if (cfg.probes == 0) throw ConfigError("probe count must be positive");
  if (cfg.inject_break && *cfg.inject_break != "unshared-vertex-mlp")
    throw ConfigError("unknown break '" + *cfg.inject_break + "' (expected unshared-vertex-mlp)");
  std::vector<CheckResult> out;
  out.push_back(check_graph_conservation(cfg.seed, cfg.graphs));
  out.push_back(check_linearity(cfg.seed + 1, cfg.probes));
  out.push_back(check_roundtrip(cfg.seed + 2, cfg.probes));
  ModelConfig mc;
  mc.unshared_vertex_mlp = cfg.inject_break.has_value();
  FluxGNNModel model = FluxGNNModel::init(mc, cfg.seed);
  out.push_back(check_flux_symmetry(model, cfg.seed + 3, cfg.probes));
  out.push_back(check_scaling(cfg.seed + 4));
  out.push_back(check_reflection(cfg.seed + 5));
  out.push_back(check_en_equivariance(cfg.seed + 6, cfg.probes));
  out.push_back(check_bb_conservation(cfg.seed + 7));
  out.push_back(check_bb_toy());
  return out;
}

}  // namespace fluxsolve
