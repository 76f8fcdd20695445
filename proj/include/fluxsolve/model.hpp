#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxsolve/equivariant.hpp"
#include "fluxsolve/fvm.hpp"
#include "fluxsolve/mesh.hpp"
#include "fluxsolve/tensor.hpp"

namespace fluxsolve {

enum class SolverKind { Explicit, BarzilaiBorwein };

struct SolverConfig {
  SolverKind kind = SolverKind::Explicit;
  std::size_t n_rep = 1;

  // "explicit" or "bb:N"
  static SolverConfig parse(const std::string& s);
  std::string str() const;
};

struct ModelConfig {
  std::size_t encoded_dim = 64;
  std::size_t bundle = 1;  // K, steps predicted per forward pass
  std::size_t smoothing_layers = 1;
  SolverConfig solver;
  double u_ref = 1.0;
  DimensionSignature sig_u = DimensionSignature::quantity_u();
  DimensionSignature sig_c = DimensionSignature::velocity();
  DimensionSignature sig_D = DimensionSignature::diffusion();
  // Every similarity gate replaced by the identity; the layer then reduces
  // to the blended FVM scheme.
  bool unit_gates = false;
  // Negative control: the j-side vertex MLP gets its own weights, which
  // breaks permutation invariance of the flux function.
  bool unshared_vertex_mlp = false;
};

struct FluxGNNModel {
  ModelConfig config;
  ad::Parameter enc_u;  // (1 x W)
  ad::Parameter enc_c;  // (1 x W), applied to each velocity component
  ad::Parameter enc_D;  // (1 x W)
  MlpParams f_vertex, f_linear, f_upwind, f_conv, f_grad;
  std::optional<MlpParams> f_vertex_j;
  ad::Parameter smoothing;  // (1 x smoothing_layers), temporal smoothing weights w
  // Left inverse of enc_u, block by block: segment k equals w_k / |w_k|^2.
  Matrix decoder;

  // enc_u = 1/sqrt(W) everywhere, enc_c = enc_D = 1, MLP weights uniform in
  // +-0.1 with final bias 1.5, smoothing weights 1.
  static FluxGNNModel init(const ModelConfig& config, std::uint64_t seed);

  std::vector<ad::Parameter*> parameters();
  std::size_t block_width() const { return config.encoded_dim / config.bundle; }

  // Recomputes the pseudoinverse decoder; throws NumericalError when a block
  // of enc_u has norm below tol::encoder_min_norm.
  void refresh_decoder();
  // max over blocks of |delta_k . w_k - 1|
  double decoder_identity_error() const;

  nlohmann::json to_json() const;
  // Revalidates the stored decoder against the encoder (tolerance 1e-10);
  // throws CorruptionError on mismatch.
  static FluxGNNModel from_json(const nlohmann::json& j);
};

// Physical inputs of one rollout.
struct Problem {
  const Mesh* mesh = nullptr;
  TransportParams params;
  BoundaryConditions bcs;
  double dt = 0.1;
  double u_ref = 1.0;
};

// Parameters of a model registered on one tape.
struct BoundModel {
  ad::Tensor enc_u, enc_c, enc_D, smoothing;
  BoundMlp f_vertex, f_vertex_j, f_linear, f_upwind, f_conv, f_grad;
  std::vector<ad::Tensor> decoders;  // (B x 1) per block, differentiable in enc_u
};

BoundModel bind(ad::Tape& tape, FluxGNNModel& model);

// Face geometry and problem-dependent constants reused by every step.
struct LayerContext {
  std::size_t n_cells = 0;
  std::size_t dim = 1;
  std::vector<double> volumes;
  // interior faces
  std::vector<std::size_t> int_faces, int_owner, int_neighbor, int_donor;
  std::vector<double> int_w_owner, int_w_neighbor, int_inv_dist;
  Matrix int_normal, int_dhat;
  // boundary faces
  std::vector<std::size_t> bnd_faces, bnd_owner;
  std::vector<FaceKind> bnd_kind;
  std::vector<double> bnd_value, bnd_inv_dist, bnd_normal_offset;
  Matrix bnd_normal;
  // Messages are computed over [interior; boundary] rows, permuted back to
  // face-id order, then scattered (owner +, neighbor -).
  std::vector<std::size_t> face_to_row;
  std::vector<double> face_area;  // by face id
  kernels::Incidence incidence;
  // per-face scales of the similarity gates, same ordering
  std::vector<double> sigma_u, sigma_flux, sigma_grad;
  // raw face velocities (faces x dim) and diffusion (faces x 1), same ordering
  Matrix face_velocity, face_diffusion;
  double dt = 0.0;
  // -(k + 1) dt / V_i for channel block k: block k advances by (k + 1) dt
  Matrix channel_scale;  // (n_cells x W)
};

LayerContext make_context(const FluxGNNModel& model, const Problem& problem);

// Encoded edge signals, constant over a rollout.
struct EncodedEdges {
  ad::Tensor velocity;   // (n_faces x dim*W), one row per face in context order
  ad::Tensor diffusion;  // (n_faces x W)
  ad::Tensor boundary;   // (n_boundary x W): eps_u(u_hat) or eps_u(g_hat); invalid if none
};

// Vertex signal u (n_cells x 1) -> u eps_u, all K blocks at once.
ad::Tensor encode_field(const ad::Tensor& u, const BoundModel& m);
EncodedEdges encode_edges(ad::Tape& tape, const BoundModel& m, const LayerContext& ctx);
// Decoded field of block k: (n_cells x 1), through the pseudoinverse of that block.
ad::Tensor decode_block(const ad::Tensor& h, const BoundModel& m, std::size_t block);
// h_out^t = (1 - w) h^{t-1} + w h^t for each smoothing layer; `previous` is
// the state preceding decoded[0].
std::vector<ad::Tensor> bundle_smooth(const ad::Tensor& previous,
                                      const std::vector<ad::Tensor>& decoded,
                                      const ad::Tensor& weights);

// Edge features of a face in the order the flux function consumes them.
// All rows aligned; `d_hat` and `inv_dist` describe the face as seen from the
// first vertex argument.
struct FluxInputs {
  ad::Tensor u_a, u_b, u_lin, u_up, velocity, diffusion;
  Matrix d_hat;
  std::vector<double> inv_dist;
  std::vector<double> sigma_u, sigma_flux, sigma_grad;
};

// F_int = (f_v(u_a) + f_v(u_b) + f_lin(u_lin) + f_up(u_up)) / 4, (rows x W)
ad::Tensor flux_interp(const FluxInputs& in, const FluxGNNModel& model, const BoundModel& m);
// f_sim(c (x) F_int), (rows x dim*W)
ad::Tensor flux_convection(const FluxInputs& in, const ad::Tensor& f_int,
                           const FluxGNNModel& model, const BoundModel& m);
// f_sim(((u_b - u_a) / |d|) d_hat), (rows x dim*W)
ad::Tensor flux_gradient(const FluxInputs& in, const FluxGNNModel& model, const BoundModel& m);
// F_ML = F_conv - D (x) F_grad, (rows x dim*W)
ad::Tensor flux_function(const FluxInputs& in, const FluxGNNModel& model, const BoundModel& m);

// Rate term F(H) dt of the encoded state: per cell -(dt_k / V_i) sum_j S n.F.
// Each face message is computed once and scattered with opposite signs.
ad::Tensor layer_increment(const ad::Tensor& h, const EncodedEdges& enc, const LayerContext& ctx,
                           const FluxGNNModel& model, const BoundModel& m);
// Explicit step H + F(H) dt.
ad::Tensor fluxgnn_layer(const ad::Tensor& h, const EncodedEdges& enc, const LayerContext& ctx,
                         const FluxGNNModel& model, const BoundModel& m);

struct BBTrace {
  std::vector<double> alphas;
  std::vector<double> residual_norms;  // |R(H^i)| for i = 0 .. n_rep-1
  std::vector<Matrix> iterates;        // H^0 .. H^n_rep
};

using IncrementFn = std::function<ad::Tensor(const ad::Tensor&)>;

// H^{i+1} = H^i - alpha_i [H^i - H^0 - F(H^i) dt]; alpha_0 = 1, then
// alpha_i = <ds, ds> / <ds, dy> clamped to [1e-3, 1e3] (1 when |<ds, dy>| < 1e-30).
// Alpha is differentiated through, except where clamped or at the fallback.
ad::Tensor neural_nonlinear_solve(const IncrementFn& increment, const ad::Tensor& h0,
                                  std::size_t n_rep, BBTrace* trace = nullptr);

// One forward pass from decoded state u (n_cells x 1); returns `bundle`
// decoded, smoothed states.
std::vector<ad::Tensor> forward_step(const ad::Tensor& u, const EncodedEdges& enc,
                                     const LayerContext& ctx, const FluxGNNModel& model,
                                     const BoundModel& m);

// Autoregressive rollout on a tape; returns the n_steps predicted states
// (initial state excluded), each (n_cells x 1).
std::vector<ad::Tensor> rollout_on_tape(ad::Tape& tape, FluxGNNModel& model, const Problem& problem,
                                        const std::vector<double>& init, std::size_t n_steps);

// Value-only rollout: n_steps + 1 states including the initial one.
Trajectory rollout(FluxGNNModel& model, const Problem& problem, const std::vector<double>& init,
                   std::size_t n_steps);

struct PermutationReport {
  double max_residual = 0.0;
  std::size_t probes = 0;
  bool passed = false;
};

// Max over random probes of |F_ML(h_i, h_j, h_ij) - F_ML(h_j, h_i, h_ij)|,
// with the reversed view using d_ji = -d_ij and the same symmetric edge signal.
PermutationReport check_permutation_invariance(FluxGNNModel& model, std::size_t n_probes,
                                               std::uint64_t seed);
// Same check restricted to F_int.
PermutationReport check_interp_invariance(FluxGNNModel& model, std::size_t n_probes,
                                          std::uint64_t seed);

}  // namespace fluxsolve
