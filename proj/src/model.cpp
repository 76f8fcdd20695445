#include "fluxsolve/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fluxsolve/json_io.hpp"
#include "fluxsolve/tolerances.hpp"

namespace fluxsolve {

using ad::Tensor;

SolverConfig SolverConfig::parse(const std::string& s) {
  SolverConfig c;
  if (s == "explicit") return c;
  if (s.rfind("bb:", 0) == 0) {
    const std::string n = s.substr(3);
    std::size_t pos = 0;
    long v = -1;
    try {
      v = std::stol(n, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != n.size() || n.empty() || v < 1) throw ConfigError("solver: invalid iteration count in '" + s + "'");
    c.kind = SolverKind::BarzilaiBorwein;
    c.n_rep = static_cast<std::size_t>(v);
    return c;
  }
  throw ConfigError("solver must be 'explicit' or 'bb:N', got '" + s + "'");
}

std::string SolverConfig::str() const {
  return kind == SolverKind::Explicit ? "explicit" : "bb:" + std::to_string(n_rep);
}

namespace {

void validate_config(const ModelConfig& c) {
  if (c.encoded_dim == 0) throw ConfigError("encoded dimension must be positive");
  if (c.bundle == 0) throw ConfigError("bundle size must be positive");
  if (c.encoded_dim % c.bundle != 0)
    throw ConfigError("encoded dimension " + std::to_string(c.encoded_dim) +
                      " is not divisible by bundle size " + std::to_string(c.bundle));
  if (c.smoothing_layers == 0) throw ConfigError("smoothing layer count must be positive");
  if (!(c.u_ref > 0.0)) throw ConfigError("reference quantity must be positive");
}

nlohmann::json param_json(const ad::Parameter& p) { return json_io::matrix_to_json(p.value); }

ad::Parameter param_from(const std::string& name, const nlohmann::json& j) {
  return ad::Parameter(name, json_io::matrix_from_json(j));
}

}  // namespace

FluxGNNModel FluxGNNModel::init(const ModelConfig& config, std::uint64_t seed) {
  validate_config(config);
  const std::size_t w = config.encoded_dim;
  FluxGNNModel m;
  m.config = config;
  m.enc_u = ad::Parameter("enc_u", Matrix(1, w, 1.0 / std::sqrt(static_cast<double>(w))));
  m.enc_c = ad::Parameter("enc_c", Matrix(1, w, 1.0));
  m.enc_D = ad::Parameter("enc_D", Matrix(1, w, 1.0));
  std::mt19937_64 rng(seed);
  m.f_vertex = MlpParams::init("f_vertex", w, w, w, rng);
  m.f_linear = MlpParams::init("f_linear", w, w, w, rng);
  m.f_upwind = MlpParams::init("f_upwind", w, w, w, rng);
  m.f_conv = MlpParams::init("f_conv", w, w, w, rng);
  m.f_grad = MlpParams::init("f_grad", w, w, w, rng);
  if (config.unshared_vertex_mlp) m.f_vertex_j = MlpParams::init("f_vertex_j", w, w, w, rng);
  m.smoothing = ad::Parameter("smoothing", Matrix(1, config.smoothing_layers, 1.0));
  m.refresh_decoder();
  return m;
}

std::vector<ad::Parameter*> FluxGNNModel::parameters() {
  std::vector<ad::Parameter*> out{&enc_u, &enc_c, &enc_D};
  for (MlpParams* p : {&f_vertex, &f_linear, &f_upwind, &f_conv, &f_grad})
    for (auto* q : p->parameters()) out.push_back(q);
  if (f_vertex_j)
    for (auto* q : f_vertex_j->parameters()) out.push_back(q);
  out.push_back(&smoothing);
  return out;
}

void FluxGNNModel::refresh_decoder() {
  const std::size_t b = block_width();
  decoder = Matrix(1, config.encoded_dim);
  for (std::size_t k = 0; k < config.bundle; ++k) {
    double n2 = 0.0;
    for (std::size_t c = k * b; c < (k + 1) * b; ++c) n2 += enc_u.value.data[c] * enc_u.value.data[c];
    if (!(std::sqrt(n2) >= tol::encoder_min_norm))
      throw NumericalError("encoder block " + std::to_string(k) + " is rank-deficient (norm " +
                           std::to_string(std::sqrt(n2)) + ")");
    for (std::size_t c = k * b; c < (k + 1) * b; ++c) decoder.data[c] = enc_u.value.data[c] / n2;
  }
}

double FluxGNNModel::decoder_identity_error() const {
  const std::size_t b = block_width();
  double worst = 0.0;
  for (std::size_t k = 0; k < config.bundle; ++k) {
    double s = 0.0;
    for (std::size_t c = k * b; c < (k + 1) * b; ++c) s += decoder.data[c] * enc_u.value.data[c];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

nlohmann::json FluxGNNModel::to_json() const {
  nlohmann::json cfg{{"encoded_dim", config.encoded_dim},
                     {"bundle", config.bundle},
                     {"smoothing_layers", config.smoothing_layers},
                     {"solver", config.solver.str()},
                     {"u_ref", config.u_ref},
                     {"sig_u", signature_to_json(config.sig_u)},
                     {"sig_c", signature_to_json(config.sig_c)},
                     {"sig_D", signature_to_json(config.sig_D)},
                     {"unit_gates", config.unit_gates},
                     {"unshared_vertex_mlp", config.unshared_vertex_mlp}};
  nlohmann::json j{{"config", cfg},
                   {"enc_u", param_json(enc_u)},
                   {"enc_c", param_json(enc_c)},
                   {"enc_D", param_json(enc_D)},
                   {"f_vertex", f_vertex.to_json()},
                   {"f_linear", f_linear.to_json()},
                   {"f_upwind", f_upwind.to_json()},
                   {"f_conv", f_conv.to_json()},
                   {"f_grad", f_grad.to_json()},
                   {"smoothing", param_json(smoothing)},
                   {"decoder", json_io::matrix_to_json(decoder)}};
  if (f_vertex_j) j["f_vertex_j"] = f_vertex_j->to_json();
  return j;
}

FluxGNNModel FluxGNNModel::from_json(const nlohmann::json& j) {
  FluxGNNModel m;
  try {
    const auto& c = j.at("config");
    m.config.encoded_dim = c.at("encoded_dim").get<std::size_t>();
    m.config.bundle = c.at("bundle").get<std::size_t>();
    m.config.smoothing_layers = c.at("smoothing_layers").get<std::size_t>();
    m.config.solver = SolverConfig::parse(c.at("solver").get<std::string>());
    m.config.u_ref = c.at("u_ref").get<double>();
    m.config.sig_u = signature_from_json(c.at("sig_u"));
    m.config.sig_c = signature_from_json(c.at("sig_c"));
    m.config.sig_D = signature_from_json(c.at("sig_D"));
    m.config.unit_gates = c.at("unit_gates").get<bool>();
    m.config.unshared_vertex_mlp = c.at("unshared_vertex_mlp").get<bool>();
    validate_config(m.config);
    m.enc_u = param_from("enc_u", j.at("enc_u"));
    m.enc_c = param_from("enc_c", j.at("enc_c"));
    m.enc_D = param_from("enc_D", j.at("enc_D"));
    m.f_vertex = MlpParams::from_json("f_vertex", j.at("f_vertex"));
    m.f_linear = MlpParams::from_json("f_linear", j.at("f_linear"));
    m.f_upwind = MlpParams::from_json("f_upwind", j.at("f_upwind"));
    m.f_conv = MlpParams::from_json("f_conv", j.at("f_conv"));
    m.f_grad = MlpParams::from_json("f_grad", j.at("f_grad"));
    if (j.contains("f_vertex_j")) m.f_vertex_j = MlpParams::from_json("f_vertex_j", j.at("f_vertex_j"));
    m.smoothing = param_from("smoothing", j.at("smoothing"));
    m.decoder = json_io::matrix_from_json(j.at("decoder"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint: ") + e.what());
  }
  const std::size_t w = m.config.encoded_dim;
  auto need = [](const Matrix& v, std::size_t r, std::size_t c, const char* what) {
    if (v.rows != r || v.cols != c)
      throw CorruptionError(std::string("checkpoint: ") + what + " has shape " + v.shape_str());
  };
  need(m.enc_u.value, 1, w, "enc_u");
  need(m.enc_c.value, 1, w, "enc_c");
  need(m.enc_D.value, 1, w, "enc_D");
  need(m.decoder, 1, w, "decoder");
  need(m.smoothing.value, 1, m.config.smoothing_layers, "smoothing");
  for (const MlpParams* p : {&m.f_vertex, &m.f_linear, &m.f_upwind, &m.f_conv, &m.f_grad})
    if (p->in != w || p->out != w) throw CorruptionError("checkpoint: MLP width does not match encoder");
  if (m.config.unshared_vertex_mlp != m.f_vertex_j.has_value())
    throw CorruptionError("checkpoint: unshared vertex MLP flag does not match stored weights");
  const Matrix stored = m.decoder;
  try {
    m.refresh_decoder();
  } catch (const NumericalError& e) {
    throw CorruptionError(std::string("checkpoint: ") + e.what());
  }
  double scale = 0.0, diff = 0.0;
  for (std::size_t c = 0; c < w; ++c) {
    scale = std::max(scale, std::abs(m.decoder.data[c]));
    diff = std::max(diff, std::abs(m.decoder.data[c] - stored.data[c]));
  }
  if (diff > tol::decoder_identity_rel * std::max(scale, 1.0))
    throw CorruptionError("checkpoint: stored decoder is not the pseudoinverse of the encoder");
  if (m.decoder_identity_error() > tol::decoder_identity_rel)
    throw CorruptionError("checkpoint: decoder does not invert the encoder");
  return m;
}

BoundModel bind(ad::Tape& tape, FluxGNNModel& model) {
  BoundModel b;
  b.enc_u = tape.parameter(model.enc_u);
  b.enc_c = tape.parameter(model.enc_c);
  b.enc_D = tape.parameter(model.enc_D);
  b.smoothing = tape.parameter(model.smoothing);
  if (!model.config.unit_gates) {
    b.f_vertex = bind(tape, model.f_vertex);
    b.f_vertex_j = model.f_vertex_j ? bind(tape, *model.f_vertex_j) : b.f_vertex;
    b.f_linear = bind(tape, model.f_linear);
    b.f_upwind = bind(tape, model.f_upwind);
    b.f_conv = bind(tape, model.f_conv);
    b.f_grad = bind(tape, model.f_grad);
  }
  const std::size_t bw = model.block_width();
  for (std::size_t k = 0; k < model.config.bundle; ++k) {
    const Tensor seg = ad::slice_cols(b.enc_u, k * bw, (k + 1) * bw);
    const Tensor n2 = ad::sum_all(ad::mul(seg, seg));
    b.decoders.push_back(ad::transpose(ad::div_scalar(seg, n2)));
  }
  return b;
}

LayerContext make_context(const FluxGNNModel& model, const Problem& problem) {
  if (!problem.mesh) throw ConfigError("problem has no mesh");
  const Mesh& mesh = *problem.mesh;
  if (!(problem.dt > 0.0)) throw ConfigError("time step must be positive");
  if (problem.params.diffusion < 0.0) throw ConfigError("diffusion coefficient must be >= 0");
  if (static_cast<int>(problem.params.velocity.size()) != mesh.dim)
    throw ConfigError("velocity dimension does not match mesh");
  if (!problem.params.face_velocity.empty() && problem.params.face_velocity.size() != mesh.n_faces())
    throw ConfigError("per-face velocity count does not match mesh");

  LayerContext ctx;
  ctx.n_cells = mesh.n_cells();
  ctx.dim = static_cast<std::size_t>(mesh.dim);
  ctx.volumes = mesh.cell_volumes;
  ctx.dt = problem.dt;
  const std::size_t dim = ctx.dim;

  std::vector<std::size_t> order;
  for (std::size_t f = 0; f < mesh.n_faces(); ++f)
    if (!mesh.faces[f].is_boundary()) order.push_back(f);
  const std::size_t n_int = order.size();
  for (std::size_t f = 0; f < mesh.n_faces(); ++f)
    if (mesh.faces[f].is_boundary()) order.push_back(f);
  const std::size_t n_bnd = order.size() - n_int;

  ctx.int_normal = Matrix(n_int, dim);
  ctx.int_dhat = Matrix(n_int, dim);
  ctx.bnd_normal = Matrix(n_bnd, dim);
  ctx.face_velocity = Matrix(order.size(), dim);
  ctx.face_diffusion = Matrix(order.size(), 1, problem.params.diffusion);
  ctx.face_to_row.assign(mesh.n_faces(), 0);
  for (const auto& f : mesh.faces) ctx.face_area.push_back(f.area);

  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t fid = order[r];
    const Face& f = mesh.faces[fid];
    ctx.face_to_row[fid] = r;
    const Vec& c = problem.params.velocity_at(fid);
    for (std::size_t d = 0; d < dim; ++d) ctx.face_velocity(r, d) = c[d];
    const double dist = norm(f.d);
    if (!(dist > 0.0)) throw ConfigError("face " + std::to_string(fid) + " has zero-length d");
    const double sig_u = sigma_for(model.config.sig_u, dist, problem.dt, problem.u_ref);
    ctx.sigma_u.push_back(sig_u);
    ctx.sigma_flux.push_back(sigma_for(DimensionSignature::flux(), dist, problem.dt, problem.u_ref));
    ctx.sigma_grad.push_back(sigma_for(DimensionSignature::gradient(), dist, problem.dt, problem.u_ref));
    const auto owner = static_cast<std::size_t>(f.owner);
    if (r < n_int) {
      const auto nb = static_cast<std::size_t>(f.neighbor);
      ctx.int_faces.push_back(fid);
      ctx.int_owner.push_back(owner);
      ctx.int_neighbor.push_back(nb);
      ctx.int_donor.push_back(dot(c, f.normal) >= 0.0 ? owner : nb);
      const auto [wi, wj] = central_weights(mesh, fid);
      ctx.int_w_owner.push_back(wi);
      ctx.int_w_neighbor.push_back(wj);
      ctx.int_inv_dist.push_back(1.0 / dist);
      for (std::size_t d = 0; d < dim; ++d) {
        ctx.int_normal(r, d) = f.normal[d];
        ctx.int_dhat(r, d) = f.d[d] / dist;
      }
    } else {
      const std::size_t b = r - n_int;
      const BoundaryCondition& bc = problem.bcs.at(fid);
      if (bc.kind != FaceKind::Dirichlet && bc.kind != FaceKind::Neumann)
        throw ConfigError("boundary face " + std::to_string(fid) + " has a non-boundary condition");
      ctx.bnd_faces.push_back(fid);
      ctx.bnd_owner.push_back(owner);
      ctx.bnd_kind.push_back(bc.kind);
      ctx.bnd_value.push_back(bc.value);
      const auto& xi = mesh.cell_centroids[owner];
      Vec rvec(dim);
      for (std::size_t d = 0; d < dim; ++d) rvec[d] = f.centroid[d] - xi[d];
      ctx.bnd_inv_dist.push_back(1.0 / norm(rvec));
      ctx.bnd_normal_offset.push_back(dot(rvec, f.normal));
      for (std::size_t d = 0; d < dim; ++d) ctx.bnd_normal(b, d) = f.normal[d];
    }
  }

  std::vector<long> owners(mesh.n_faces()), neighbors(mesh.n_faces());
  for (std::size_t f = 0; f < mesh.n_faces(); ++f) {
    owners[f] = mesh.faces[f].owner;
    neighbors[f] = mesh.faces[f].neighbor;
  }
  ctx.incidence = kernels::build_antisymmetric_incidence(owners, neighbors, mesh.n_cells());

  const std::size_t w = model.config.encoded_dim;
  const std::size_t bw = model.block_width();
  ctx.channel_scale = Matrix(ctx.n_cells, w);
  for (std::size_t i = 0; i < ctx.n_cells; ++i)
    for (std::size_t c = 0; c < w; ++c)
      ctx.channel_scale(i, c) = -static_cast<double>(c / bw + 1) * problem.dt / ctx.volumes[i];
  return ctx;
}

Tensor encode_field(const Tensor& u, const BoundModel& m) {
  if (u.cols() != 1) throw std::invalid_argument("encode_field: expected a column, got " + u.value().shape_str());
  return ad::linear(u, m.enc_u);
}

EncodedEdges encode_edges(ad::Tape& tape, const BoundModel& m, const LayerContext& ctx) {
  EncodedEdges e;
  std::vector<Tensor> comps;
  for (std::size_t d = 0; d < ctx.dim; ++d) {
    Matrix col(ctx.face_velocity.rows, 1);
    for (std::size_t r = 0; r < col.rows; ++r) col.data[r] = ctx.face_velocity(r, d);
    comps.push_back(ad::linear(tape.constant(std::move(col)), m.enc_c));
  }
  e.velocity = comps.size() == 1 ? comps[0] : ad::concat_cols(comps);
  e.diffusion = ad::linear(tape.constant(ctx.face_diffusion), m.enc_D);
  if (!ctx.bnd_faces.empty()) e.boundary = ad::linear(tape.constant(Matrix::column(ctx.bnd_value)), m.enc_u);
  return e;
}

Tensor decode_block(const Tensor& h, const BoundModel& m, std::size_t block) {
  if (block >= m.decoders.size()) throw std::out_of_range("decode_block: block index");
  const std::size_t bw = m.decoders[block].rows();
  return ad::linear(ad::slice_cols(h, block * bw, (block + 1) * bw), m.decoders[block]);
}

std::vector<Tensor> bundle_smooth(const Tensor& previous, const std::vector<Tensor>& decoded,
                                  const Tensor& weights) {
  std::vector<Tensor> seq;
  seq.push_back(previous);
  for (const auto& d : decoded) seq.push_back(d);
  ad::Tape& tape = previous.tape();
  const Tensor one = tape.constant(Matrix::scalar(1.0));
  for (std::size_t l = 0; l < weights.cols(); ++l) {
    const Tensor w = ad::slice_cols(weights, l, l + 1);
    const Tensor keep = ad::sub(one, w);
    std::vector<Tensor> next{seq[0]};
    for (std::size_t t = 1; t < seq.size(); ++t)
      next.push_back(ad::add(ad::mul_scalar(seq[t - 1], keep), ad::mul_scalar(seq[t], w)));
    seq = std::move(next);
  }
  return {seq.begin() + 1, seq.end()};
}

namespace {

Tensor gate(const Tensor& h, const std::vector<double>& sigma, const BoundMlp& mlp, std::size_t dim,
            const FluxGNNModel& model) {
  if (model.config.unit_gates) return h;
  return f_sim(h, sigma, mlp, dim);
}

}  // namespace

Tensor flux_interp(const FluxInputs& in, const FluxGNNModel& model, const BoundModel& m) {
  const Tensor a = gate(in.u_a, in.sigma_u, m.f_vertex, 1, model);
  const Tensor b = gate(in.u_b, in.sigma_u, model.f_vertex_j ? m.f_vertex_j : m.f_vertex, 1, model);
  const Tensor lin = gate(in.u_lin, in.sigma_u, m.f_linear, 1, model);
  const Tensor up = gate(in.u_up, in.sigma_u, m.f_upwind, 1, model);
  return ad::scale(ad::add(ad::add(ad::add(a, b), lin), up), 0.25);
}

Tensor flux_convection(const FluxInputs& in, const Tensor& f_int, const FluxGNNModel& model,
                       const BoundModel& m) {
  const std::size_t dim = in.d_hat.cols;
  return gate(ad::gate_groups(f_int, in.velocity, dim), in.sigma_flux, m.f_conv, dim, model);
}

Tensor flux_gradient(const FluxInputs& in, const FluxGNNModel& model, const BoundModel& m) {
  const std::size_t dim = in.d_hat.cols;
  const Tensor g = ad::scale_rows(ad::sub(in.u_b, in.u_a), in.inv_dist);
  return gate(ad::expand_groups(g, in.d_hat), in.sigma_grad, m.f_grad, dim, model);
}

Tensor flux_function(const FluxInputs& in, const FluxGNNModel& model, const BoundModel& m) {
  const std::size_t dim = in.d_hat.cols;
  const Tensor conv = flux_convection(in, flux_interp(in, model, m), model, m);
  const Tensor grad = flux_gradient(in, model, m);
  return ad::sub(conv, ad::gate_groups(in.diffusion, grad, dim));
}

namespace {

std::vector<double> slice(const std::vector<double>& v, std::size_t b, std::size_t e) {
  return {v.begin() + static_cast<long>(b), v.begin() + static_cast<long>(e)};
}

// Messages S n.F per face, rows in [interior; boundary] order: (faces x W).
Tensor face_messages(const Tensor& h, const EncodedEdges& enc, const LayerContext& ctx,
                     const FluxGNNModel& model, const BoundModel& m) {
  const std::size_t n_int = ctx.int_faces.size();
  const std::size_t n_all = n_int + ctx.bnd_faces.size();
  const std::size_t dim = ctx.dim;
  std::vector<Tensor> parts;

  if (n_int > 0) {
    FluxInputs in;
    in.u_a = ad::gather_rows(h, ctx.int_owner);
    in.u_b = ad::gather_rows(h, ctx.int_neighbor);
    in.u_lin = ad::add(ad::scale_rows(in.u_a, ctx.int_w_owner), ad::scale_rows(in.u_b, ctx.int_w_neighbor));
    in.u_up = ad::gather_rows(h, ctx.int_donor);
    const bool all_int = n_int == n_all;
    std::vector<std::size_t> rows(n_int);
    for (std::size_t r = 0; r < n_int; ++r) rows[r] = r;
    in.velocity = all_int ? enc.velocity : ad::gather_rows(enc.velocity, rows);
    in.diffusion = all_int ? enc.diffusion : ad::gather_rows(enc.diffusion, rows);
    in.d_hat = ctx.int_dhat;
    in.inv_dist = ctx.int_inv_dist;
    in.sigma_u = slice(ctx.sigma_u, 0, n_int);
    in.sigma_flux = slice(ctx.sigma_flux, 0, n_int);
    in.sigma_grad = slice(ctx.sigma_grad, 0, n_int);
    const Tensor flux = flux_function(in, model, m);
    parts.push_back(ad::contract_groups(flux, ctx.int_normal));
  }

  if (n_all > n_int) {
    const std::size_t nb = n_all - n_int;
    std::vector<std::size_t> rows(nb);
    for (std::size_t r = 0; r < nb; ++r) rows[r] = n_int + r;
    const Tensor vel = ad::gather_rows(enc.velocity, rows);
    const Tensor dif = ad::gather_rows(enc.diffusion, rows);
    const Tensor u_i = ad::gather_rows(h, ctx.bnd_owner);
    std::vector<double> keep_owner(nb), bnd_coef(nb), grad_from_diff(nb), grad_from_bnd(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const bool dir = ctx.bnd_kind[b] == FaceKind::Dirichlet;
      keep_owner[b] = dir ? 0.0 : 1.0;
      bnd_coef[b] = dir ? 1.0 : ctx.bnd_normal_offset[b];
      grad_from_diff[b] = dir ? ctx.bnd_inv_dist[b] : 0.0;
      grad_from_bnd[b] = dir ? 0.0 : 1.0;
    }
    // Dirichlet: u_b = eps(u_hat), g = (u_b - u_i) / |x_ij - x_i|
    // Neumann:   u_b = u_i + eps(g_hat) (x_ij - x_i).n, g = eps(g_hat)
    const Tensor u_b = ad::add(ad::scale_rows(u_i, keep_owner), ad::scale_rows(enc.boundary, bnd_coef));
    const Tensor g = ad::add(ad::scale_rows(ad::sub(u_b, u_i), grad_from_diff),
                             ad::scale_rows(enc.boundary, grad_from_bnd));
    const auto sig_u = slice(ctx.sigma_u, n_int, n_all);
    const auto sig_f = slice(ctx.sigma_flux, n_int, n_all);
    const auto sig_g = slice(ctx.sigma_grad, n_int, n_all);
    const Tensor f_int = gate(u_b, sig_u, m.f_linear, 1, model);
    const Tensor conv = gate(ad::gate_groups(f_int, vel, dim), sig_f, m.f_conv, dim, model);
    const Tensor grad = gate(ad::expand_groups(g, ctx.bnd_normal), sig_g, m.f_grad, dim, model);
    const Tensor flux = ad::sub(conv, ad::gate_groups(dif, grad, dim));
    parts.push_back(ad::contract_groups(flux, ctx.bnd_normal));
  }
  return parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
}

}  // namespace

Tensor layer_increment(const Tensor& h, const EncodedEdges& enc, const LayerContext& ctx,
                       const FluxGNNModel& model, const BoundModel& m) {
  if (h.rows() != ctx.n_cells || h.cols() != ctx.channel_scale.cols)
    throw std::invalid_argument("fluxgnn_layer: state shape " + h.value().shape_str() +
                                " does not match the mesh and encoder");
  Tensor msg;
  try {
    msg = face_messages(h, enc, ctx, model, m);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("fluxgnn_layer: non-finite face flux (") + e.what() + ")");
  }
  const Tensor by_face = ad::gather_rows(msg, ctx.face_to_row);
  const Tensor acc = ad::scatter(ad::scale_rows(by_face, ctx.face_area), ctx.incidence);
  return ad::mul(acc, acc.tape().constant(ctx.channel_scale));
}

Tensor fluxgnn_layer(const Tensor& h, const EncodedEdges& enc, const LayerContext& ctx,
                     const FluxGNNModel& model, const BoundModel& m) {
  return ad::add(h, layer_increment(h, enc, ctx, model, m));
}

Tensor neural_nonlinear_solve(const IncrementFn& increment, const Tensor& h0, std::size_t n_rep,
                              BBTrace* trace) {
  if (n_rep == 0) throw ConfigError("BB solver needs at least one iteration");
  Tensor h = h0, h_prev, r_prev;
  if (trace) trace->iterates.push_back(h0.value());
  for (std::size_t i = 0; i < n_rep; ++i) {
    const Tensor r = ad::sub(ad::sub(h, h0), increment(h));
    double rn = 0.0;
    for (double v : r.value().data) rn += v * v;
    Tensor step;
    double alpha = 1.0;
    if (i > 0) {
      const Tensor ds = ad::sub(h, h_prev);
      const Tensor dy = ad::sub(r, r_prev);
      const Tensor ss = ad::sum_all(ad::mul(ds, ds));
      const Tensor sy = ad::sum_all(ad::mul(ds, dy));
      if (std::abs(sy.item()) >= tol::bb_min_denominator) {
        alpha = ss.item() / sy.item();
        if (alpha >= tol::bb_alpha_min && alpha <= tol::bb_alpha_max)
          step = ad::mul_scalar(r, ad::div_scalar(ss, sy));
        else
          alpha = std::clamp(alpha, tol::bb_alpha_min, tol::bb_alpha_max);
      }
    }
    if (!step.valid()) step = alpha == 1.0 ? r : ad::scale(r, alpha);
    if (trace) {
      trace->alphas.push_back(alpha);
      trace->residual_norms.push_back(std::sqrt(rn));
    }
    h_prev = h;
    r_prev = r;
    h = ad::sub(h, step);
    if (trace) trace->iterates.push_back(h.value());
  }
  return h;
}

std::vector<Tensor> forward_step(const Tensor& u, const EncodedEdges& enc, const LayerContext& ctx,
                                 const FluxGNNModel& model, const BoundModel& m) {
  const Tensor h0 = encode_field(u, m);
  Tensor h;
  if (model.config.solver.kind == SolverKind::Explicit) {
    h = fluxgnn_layer(h0, enc, ctx, model, m);
  } else {
    h = neural_nonlinear_solve(
        [&](const Tensor& x) { return layer_increment(x, enc, ctx, model, m); }, h0,
        model.config.solver.n_rep);
  }
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < model.config.bundle; ++k) out.push_back(decode_block(h, m, k));
  if (model.config.bundle > 1) out = bundle_smooth(u, out, m.smoothing);
  return out;
}

std::vector<Tensor> rollout_on_tape(ad::Tape& tape, FluxGNNModel& model, const Problem& problem,
                                    const std::vector<double>& init, std::size_t n_steps) {
  const LayerContext ctx = make_context(model, problem);
  if (init.size() != ctx.n_cells) throw ConfigError("initial state length does not match mesh");
  const BoundModel m = bind(tape, model);
  const EncodedEdges enc = encode_edges(tape, m, ctx);
  Tensor u = tape.constant(Matrix::column(init));
  std::vector<Tensor> out;
  while (out.size() < n_steps) {
    std::vector<Tensor> next;
    try {
      next = forward_step(u, enc, ctx, model, m);
    } catch (const NumericalError& e) {
      throw NumericalError("rollout step " + std::to_string(out.size() + 1) + ": " + e.what());
    }
    for (const auto& t : next)
      if (out.size() < n_steps) out.push_back(t);
    u = next.back();
  }
  return out;
}

Trajectory rollout(FluxGNNModel& model, const Problem& problem, const std::vector<double>& init,
                   std::size_t n_steps) {
  ad::Tape tape;
  const auto states = rollout_on_tape(tape, model, problem, init, n_steps);
  Trajectory t;
  t.dt = problem.dt;
  t.params = problem.params;
  t.courant = courant_number(*problem.mesh, problem.params, problem.dt);
  t.states.push_back(init);
  for (const auto& s : states) t.states.push_back(s.value().data);
  return t;
}

namespace {

PermutationReport permutation_check(FluxGNNModel& model, std::size_t n_probes, std::uint64_t seed,
                                    bool interp_only) {
  const std::size_t w = model.config.encoded_dim;
  const std::size_t dim = 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random = [&](std::size_t r, std::size_t c) {
    Matrix mtx(r, c);
    for (double& v : mtx.data) v = u(rng);
    return mtx;
  };
  const std::size_t n = n_probes;
  ad::Tape tape;
  const BoundModel m = bind(tape, model);
  FluxInputs fwd;
  fwd.u_a = tape.constant(random(n, w));
  fwd.u_b = tape.constant(random(n, w));
  fwd.u_lin = tape.constant(random(n, w));
  fwd.u_up = tape.constant(random(n, w));
  fwd.velocity = tape.constant(random(n, dim * w));
  Matrix dif = random(n, w);
  for (double& v : dif.data) v = std::abs(v);
  fwd.diffusion = tape.constant(dif);
  fwd.d_hat = Matrix(n, dim);
  for (std::size_t r = 0; r < n; ++r) {
    const double theta = 3.141592653589793 * u(rng);
    fwd.d_hat(r, 0) = std::cos(theta);
    fwd.d_hat(r, 1) = std::sin(theta);
    fwd.inv_dist.push_back(1.0 / (0.05 + std::abs(u(rng))));
    fwd.sigma_u.push_back(1.0);
    fwd.sigma_flux.push_back(0.5 + std::abs(u(rng)));
    fwd.sigma_grad.push_back(0.5 + std::abs(u(rng)));
  }
  FluxInputs rev = fwd;
  std::swap(rev.u_a, rev.u_b);
  for (double& v : rev.d_hat.data) v = -v;
  const Tensor a = interp_only ? flux_interp(fwd, model, m) : flux_function(fwd, model, m);
  const Tensor b = interp_only ? flux_interp(rev, model, m) : flux_function(rev, model, m);
  PermutationReport rep;
  rep.probes = n;
  for (std::size_t e = 0; e < a.value().size(); ++e)
    rep.max_residual = std::max(rep.max_residual, std::abs(a.value().data[e] - b.value().data[e]));
  rep.passed = rep.max_residual <= tol::flux_symmetry_abs;
  return rep;
}

}  // namespace

PermutationReport check_permutation_invariance(FluxGNNModel& model, std::size_t n_probes,
                                               std::uint64_t seed) {
  return permutation_check(model, n_probes, seed, false);
}

PermutationReport check_interp_invariance(FluxGNNModel& model, std::size_t n_probes,
                                          std::uint64_t seed) {
  return permutation_check(model, n_probes, seed, true);
}

}  // namespace fluxsolve
