#include "fluxsolve/equivariant.hpp"

#include <cmath>

#include "fluxsolve/common.hpp"
#include "fluxsolve/json_io.hpp"

namespace fluxsolve {

namespace {

nlohmann::json rational_to_json(const Rational& r) {
  if (r.den == 1) return r.num;
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

Rational rational_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return {j.get<int>(), 1};
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    if (slash == std::string::npos) return {std::stoi(s), 1};
    const int den = std::stoi(s.substr(slash + 1));
    if (den == 0) throw CorruptionError("signature: zero denominator");
    return {std::stoi(s.substr(0, slash)), den};
  }
  throw CorruptionError("signature: exponent must be an integer or 'p/q'");
}

}  // namespace

nlohmann::json signature_to_json(const DimensionSignature& s) {
  return nlohmann::json::array(
      {rational_to_json(s.length), rational_to_json(s.time), rational_to_json(s.quantity)});
}

DimensionSignature signature_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw CorruptionError("signature: expected a triple");
  return {rational_from_json(j[0]), rational_from_json(j[1]), rational_from_json(j[2])};
}

double sigma_for(const DimensionSignature& sig, double dx, double dt, double u_ref) {
  if (!(dx > 0.0) || !(dt > 0.0) || !(u_ref > 0.0))
    throw ConfigError("sigma_for: dx, dt and U_ref must be positive");
  return std::pow(dx, sig.length.value()) * std::pow(dt, sig.time.value()) *
         std::pow(u_ref, sig.quantity.value());
}

MlpParams MlpParams::init(const std::string& name, std::size_t in, std::size_t hidden,
                          std::size_t out, std::mt19937_64& rng, double weight_range,
                          double final_bias) {
  MlpParams p = zeros(name, in, hidden, out);
  std::uniform_real_distribution<double> u(-weight_range, weight_range);
  for (double& v : p.w1.value.data) v = u(rng);
  for (double& v : p.b1.value.data) v = u(rng);
  for (double& v : p.w2.value.data) v = u(rng);
  for (double& v : p.b2.value.data) v = final_bias;
  return p;
}

MlpParams MlpParams::zeros(const std::string& name, std::size_t in, std::size_t hidden,
                           std::size_t out) {
  MlpParams p;
  p.in = in;
  p.hidden = hidden;
  p.out = out;
  p.w1 = ad::Parameter(name + ".w1", Matrix(in, hidden));
  p.b1 = ad::Parameter(name + ".b1", Matrix(1, hidden));
  p.w2 = ad::Parameter(name + ".w2", Matrix(hidden, out));
  p.b2 = ad::Parameter(name + ".b2", Matrix(1, out));
  return p;
}

std::vector<ad::Parameter*> MlpParams::parameters() { return {&w1, &b1, &w2, &b2}; }

nlohmann::json MlpParams::to_json() const {
  return {{"w1", json_io::matrix_to_json(w1.value)},
          {"b1", json_io::matrix_to_json(b1.value)},
          {"w2", json_io::matrix_to_json(w2.value)},
          {"b2", json_io::matrix_to_json(b2.value)}};
}

MlpParams MlpParams::from_json(const std::string& name, const nlohmann::json& j) {
  try {
    MlpParams p;
    p.w1 = ad::Parameter(name + ".w1", json_io::matrix_from_json(j.at("w1")));
    p.b1 = ad::Parameter(name + ".b1", json_io::matrix_from_json(j.at("b1")));
    p.w2 = ad::Parameter(name + ".w2", json_io::matrix_from_json(j.at("w2")));
    p.b2 = ad::Parameter(name + ".b2", json_io::matrix_from_json(j.at("b2")));
    p.in = p.w1.value.rows;
    p.hidden = p.w1.value.cols;
    p.out = p.w2.value.cols;
    if (p.b1.value.cols != p.hidden || p.w2.value.rows != p.hidden || p.b2.value.cols != p.out)
      throw CorruptionError("mlp '" + name + "': inconsistent layer shapes");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("mlp '" + name + "': " + e.what());
  }
}

BoundMlp bind(ad::Tape& tape, MlpParams& p) {
  return {tape.parameter(p.w1), tape.parameter(p.b1), tape.parameter(p.w2), tape.parameter(p.b2)};
}

ad::Tensor mlp_forward(const ad::Tensor& x, const BoundMlp& mlp) {
  if (x.cols() != mlp.w1.rows())
    throw std::invalid_argument("mlp_forward: input width " + std::to_string(x.cols()) +
                                " but layer expects " + std::to_string(mlp.w1.rows()));
  auto h = ad::tanh(ad::linear(x, mlp.w1, mlp.b1));
  return ad::tanh(ad::linear(h, mlp.w2, mlp.b2));
}

ad::Tensor mlp_forward(ad::Tape& tape, const ad::Tensor& x, MlpParams& p) {
  return mlp_forward(x, bind(tape, p));
}

ad::Tensor similarity_gate_input(const ad::Tensor& h, const std::vector<double>& sigma,
                                 std::size_t dim) {
  std::vector<double> inv(sigma.size());
  for (std::size_t r = 0; r < sigma.size(); ++r) {
    if (!(sigma[r] > 0.0)) throw std::invalid_argument("f_sim: sigma must be positive");
    inv[r] = 1.0 / sigma[r];
  }
  return ad::group_norm(ad::scale_rows(h, inv), dim);
}

ad::Tensor f_sim(const ad::Tensor& h, const std::vector<double>& sigma, const BoundMlp& mlp,
                 std::size_t dim) {
  auto gate = mlp_forward(similarity_gate_input(h, sigma, dim), mlp);
  return ad::gate_groups(gate, h, dim);
}

ad::Tensor f_en(const ad::Tensor& h, const BoundMlp& mlp) {
  return f_sim(h, std::vector<double>(h.rows(), 1.0), mlp, h.cols());
}

}  // namespace fluxsolve
