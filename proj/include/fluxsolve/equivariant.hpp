#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxsolve/tensor.hpp"

namespace fluxsolve {

struct Rational {
  int num = 0;
  int den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

// Physical dimension of a channel as exponents over (length, time, quantity
// reference). The scale of such a channel is dx^a dt^b U_ref^c.
struct DimensionSignature {
  Rational length;
  Rational time;
  Rational quantity;

  bool operator==(const DimensionSignature&) const = default;

  static DimensionSignature dimensionless() { return {}; }
  static DimensionSignature quantity_u() { return {{0}, {0}, {1}}; }
  static DimensionSignature velocity() { return {{1}, {-1}, {0}}; }
  static DimensionSignature diffusion() { return {{2}, {-1}, {0}}; }
  // c u: the convective flux of u
  static DimensionSignature flux() { return {{1}, {-1}, {1}}; }
  // grad u
  static DimensionSignature gradient() { return {{-1}, {0}, {1}}; }
};

// Integers serialize as numbers, other exponents as "p/q" strings.
nlohmann::json signature_to_json(const DimensionSignature& s);
DimensionSignature signature_from_json(const nlohmann::json& j);

// dx^a dt^b U_ref^c; throws ConfigError unless dx, dt, U_ref > 0.
double sigma_for(const DimensionSignature& sig, double dx, double dt, double u_ref);

// Linear(in -> hidden) -> tanh -> Linear(hidden -> out) -> tanh.
struct MlpParams {
  std::size_t in = 0;
  std::size_t hidden = 0;
  std::size_t out = 0;
  ad::Parameter w1, b1, w2, b2;

  // Weights and first-layer biases uniform in [-weight_range, weight_range];
  // final-layer bias constant, so initial gates sit near tanh(final_bias).
  static MlpParams init(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                        std::mt19937_64& rng, double weight_range = 0.1, double final_bias = 1.5);
  static MlpParams zeros(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out);

  std::vector<ad::Parameter*> parameters();
  nlohmann::json to_json() const;
  static MlpParams from_json(const std::string& name, const nlohmann::json& j);
};

// Parameters of one MLP registered on a tape.
struct BoundMlp {
  ad::Tensor w1, b1, w2, b2;
};

BoundMlp bind(ad::Tape& tape, MlpParams& p);

ad::Tensor mlp_forward(const ad::Tensor& x, const BoundMlp& mlp);
ad::Tensor mlp_forward(ad::Tape& tape, const ad::Tensor& x, MlpParams& p);

// Per-channel norms of h / sigma: the direct input of the similarity gate.
// h is (rows x dim*C), sigma holds one positive scale per row.
ad::Tensor similarity_gate_input(const ad::Tensor& h, const std::vector<double>& sigma,
                                 std::size_t dim);

// MLP(|h / sigma|) * h with one gate per channel shared across its `dim`
// components. Zero rows map to zero.
ad::Tensor f_sim(const ad::Tensor& h, const std::vector<double>& sigma, const BoundMlp& mlp,
                 std::size_t dim);

// MLP(|h|) h for rows of n-dimensional geometric vectors (mlp: 1 -> hidden -> 1).
ad::Tensor f_en(const ad::Tensor& h, const BoundMlp& mlp);

}  // namespace fluxsolve
