#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fluxsolve/mesh.hpp"
#include "fluxsolve/model.hpp"

namespace fluxsolve {

struct CheckResult {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

// Connected random graph embedded in `dim` dimensions: a spanning chain plus
// extra random edges, every edge an interior face with normal along d.
Mesh random_graph_mesh(std::size_t n_cells, std::size_t n_extra_edges, int dim, std::mt19937_64& rng);

// FluxGNN layers with random weights and random encoders on random graphs;
// relative drift of sum_i V_i u_i after a few steps.
CheckResult check_graph_conservation(std::uint64_t seed, std::size_t n_graphs);
// encode and decode are linear maps: residual of f(a x + b y) - a f(x) - b f(y).
CheckResult check_linearity(std::uint64_t seed, std::size_t probes);
// decode(encode(u)) = u for random encoders with block norms in [1e-6, 1e3].
CheckResult check_roundtrip(std::uint64_t seed, std::size_t probes);
// Flux function symmetry under swapping its vertex arguments.
CheckResult check_flux_symmetry(FluxGNNModel& model, std::uint64_t seed, std::size_t probes);
// Decoded rollout invariance under dx -> l dx, dt -> t dt, c -> (l/t) c, D -> (l^2/t) D.
CheckResult check_scaling(std::uint64_t seed);
// Mirroring the 1-D grid and negating c mirrors the prediction.
CheckResult check_reflection(std::uint64_t seed);
// f_en(h Q) = f_en(h) Q for random orthogonal Q in 2 and 3 dimensions.
CheckResult check_en_equivariance(std::uint64_t seed, std::size_t n_transforms);
// Every BB iterate keeps the per-channel totals sum_i V_i H_ik.
CheckResult check_bb_conservation(std::uint64_t seed);
// Implicit linear decay: BB iterates approach H0 / (1 + lambda dt) with a
// residual that decreases over 8 iterates.
CheckResult check_bb_toy();

// Reverse-mode vs central-difference gradients for every tape op and the
// composed flux functions.
std::vector<CheckResult> autodiff_suite(std::uint64_t seed, std::size_t probes);

struct PropcheckConfig {
  std::uint64_t seed = 0;
  std::size_t probes = 100;
  std::size_t graphs = 200;
  // "unshared-vertex-mlp" swaps in a model whose flux function is not symmetric.
  std::optional<std::string> inject_break;
};

std::vector<CheckResult> run_propcheck(const PropcheckConfig& cfg);

}  // namespace fluxsolve
