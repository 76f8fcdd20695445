#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fluxsolve/common.hpp"
#include "fluxsolve/kernels.hpp"

// Minimal reverse-mode automatic differentiation over dense 2-D arrays.
//
// A Tape records every operation of one forward pass. Nodes are appended in
// creation order, which is a topological order, so backward() is a single
// reverse sweep. The tape is single-use: after backward() it is consumed and
// rejects further ops or a second backward().
namespace fluxsolve::ad {

// A trainable leaf. Gradients accumulate into `grad` across backward calls
// until zero_grad().
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}
  void zero_grad() { grad = Matrix(value.rows, value.cols); }
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double item() const;
  Tape& tape() const;
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  Tensor parameter(Parameter& p);

  // Populates Parameter::grad for every parameter reachable from `loss`.
  void backward(const Tensor& loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }
  // Number of nodes whose adjoint ran in the last backward() call.
  std::size_t last_backward_visits() const { return last_visits_; }

  // --- used by op implementations ---
  Tensor record(Matrix value, std::vector<std::size_t> parents, Backward fn, const char* op);
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  // Gradient buffer of a parent, allocated on first use; nullptr if the
  // parent does not require a gradient.
  Matrix* grad_buffer(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    const char* op = "";
  };

  void check_live(const char* op) const;

  std::deque<Node> nodes_;  // stable references while recording
  bool consumed_ = false;
  std::size_t last_visits_ = 0;
};

// y = x W (+ b). x: (r x in), W: (in x out), b: (1 x out).
Tensor linear(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& x, double s);
// Row r multiplied by factors[r].
Tensor scale_rows(const Tensor& x, const std::vector<double>& factors);
Tensor tanh(const Tensor& x);

// Feature layout for geometric vectors: a row holds `dim` components of C
// channels, component-major (column d*C + k is component d of channel k).
//
// Per-channel Euclidean norm over the `dim` components: (r x dim*C) -> (r x C).
// The adjoint at a zero norm is taken as zero.
Tensor group_norm(const Tensor& x, std::size_t dim);
// Norm of each whole row: (r x n) -> (r x 1).
Tensor l2_norm_rows(const Tensor& x);
// y[r, d*C+k] = g[r, k] * x[r, d*C+k]
Tensor gate_groups(const Tensor& g, const Tensor& x, std::size_t dim);
// y[r, d*C+k] = v[r, d] * x[r, k] with v a constant (r x dim).
Tensor expand_groups(const Tensor& x, const Matrix& v);
// y[r, k] = sum_d v[r, d] * x[r, d*C+k] with v a constant (r x dim).
Tensor contract_groups(const Tensor& x, const Matrix& v);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index);
// y[t] = sum of x[s] over rows with target[s] == t (targets < 0 dropped),
// accumulated in (target, source) order.
Tensor scatter_add_rows(const Tensor& x, const std::vector<long>& targets, std::size_t n_rows);
// y[t] = sum_e sign_e x[source_e] over the incidence of t.
Tensor scatter(const Tensor& x, const kernels::Incidence& inc);
// +x[f] to owner[f], -x[f] to neighbor[f] (skipped when neighbor < 0).
Tensor scatter_antisymmetric(const Tensor& x, const std::vector<long>& owners,
                             const std::vector<long>& neighbors, std::size_t n_rows);

Tensor sum_all(const Tensor& x);  // (1 x 1)
// x / s with s a (1 x 1) tensor; throws on a zero divisor.
Tensor div_scalar(const Tensor& x, const Tensor& s);
// x * s with s a (1 x 1) tensor.
Tensor mul_scalar(const Tensor& x, const Tensor& s);

// Elementwise op with a caller-supplied derivative.
Tensor custom_unary(const Tensor& x, std::function<double(double)> f,
                    std::function<double(double)> df, const char* name);

}  // namespace fluxsolve::ad
