#include "fluxsolve/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fluxsolve::ad {

const Matrix& Tensor::value() const {
  if (!tape_) throw std::logic_error("Tensor: uninitialized");
  return tape_->value(id_);
}

double Tensor::item() const {
  const auto& v = value();
  if (v.size() != 1) throw std::invalid_argument("Tensor::item: not a scalar " + v.shape_str());
  return v.data[0];
}

Tape& Tensor::tape() const {
  if (!tape_) throw std::logic_error("Tensor: uninitialized");
  return *tape_;
}

void Tape::check_live(const char* op) const {
  if (consumed_)
    throw std::logic_error(std::string("tape already consumed by backward(); cannot run ") + op);
}

Tensor Tape::constant(Matrix value) {
  check_live("constant");
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::parameter(Parameter& p) {
  check_live("parameter");
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  n.op = "parameter";
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(Matrix value, std::vector<std::size_t> parents, Backward fn, const char* op) {
  check_live(op);
  for (std::size_t e = 0; e < value.data.size(); ++e)
    if (!std::isfinite(value.data[e]))
      throw NumericalError(std::string("op '") + op + "' produced a non-finite value at row " +
                           std::to_string(value.cols ? e / value.cols : 0));
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.op = op;
  for (auto p : n.parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Matrix* Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != n.value.size()) n.grad = Matrix(n.value.rows, n.value.cols);
  return &n.grad;
}

void Tape::backward(const Tensor& loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  if (consumed_) throw std::logic_error("backward: tape is stale (backward already ran)");
  const auto& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + lv.shape_str());
  consumed_ = true;
  last_visits_ = 0;
  if (!nodes_[loss.id()].requires_grad) return;
  *grad_buffer(loss.id()) = Matrix::scalar(1.0);
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    auto& n = nodes_[k];
    // unreachable nodes never received a gradient buffer
    if (!n.requires_grad || n.grad.size() == 0) continue;
    ++last_visits_;
    if (n.param) {
      auto& g = n.param->grad;
      if (!g.same_shape(n.value)) g = Matrix(n.value.rows, n.value.cols);
      for (std::size_t e = 0; e < g.size(); ++e) g.data[e] += n.grad.data[e];
    } else if (n.backward) {
      n.backward(*this, k);
    }
  }
  // free the tape's buffers; values stay readable
  for (auto& n : nodes_) {
    n.grad = Matrix();
    n.backward = nullptr;
  }
}

namespace {

Tape& same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": tensors on different tapes");
  return a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}

void accumulate(Matrix* dst, const Matrix& src, double s = 1.0) {
  if (!dst) return;
  for (std::size_t e = 0; e < src.size(); ++e) dst->data[e] += s * src.data[e];
}

std::size_t channels_of(const Matrix& x, std::size_t dim, const char* op) {
  if (dim == 0 || x.cols % dim != 0)
    throw std::invalid_argument(std::string(op) + ": columns " + std::to_string(x.cols) +
                                " not divisible by dim " + std::to_string(dim));
  return x.cols / dim;
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w) {
  Tape& t = same_tape(x, w, "linear");
  Matrix y;
  kernels::matmul(x.value(), w.value(), y);
  const auto xi = x.id(), wi = w.id();
  return t.record(std::move(y), {xi, wi},
                  [xi, wi](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    if (Matrix* dx = tp.grad_buffer(xi)) {
                      Matrix g;
                      kernels::matmul_nt(dy, tp.value(wi), g);
                      accumulate(dx, g);
                    }
                    if (Matrix* dw = tp.grad_buffer(wi)) {
                      Matrix g;
                      kernels::matmul_tn(tp.value(xi), dy, g);
                      accumulate(dw, g);
                    }
                  },
                  "linear");
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tape& t = same_tape(x, b, "linear");
  const auto& bv = b.value();
  if (bv.rows != 1 || bv.cols != w.value().cols)
    throw std::invalid_argument("linear: bias shape " + bv.shape_str());
  Tensor xw = linear(x, w);
  Matrix y = xw.value();
  for (std::size_t r = 0; r < y.rows; ++r)
    for (std::size_t c = 0; c < y.cols; ++c) y(r, c) += bv.data[c];
  const auto xwi = xw.id(), bi = b.id();
  return t.record(std::move(y), {xwi, bi},
                  [xwi, bi](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    accumulate(tp.grad_buffer(xwi), dy);
                    if (Matrix* db = tp.grad_buffer(bi))
                      for (std::size_t r = 0; r < dy.rows; ++r)
                        for (std::size_t c = 0; c < dy.cols; ++c) db->data[c] += dy(r, c);
                  },
                  "linear_bias");
}

Tensor transpose(const Tensor& x) {
  const auto& v = x.value();
  Matrix y(v.cols, v.rows);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = 0; c < v.cols; ++c) y(c, r) = v(r, c);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t r = 0; r < dy.rows; ++r)
                               for (std::size_t c = 0; c < dy.cols; ++c) (*dx)(c, r) += dy(r, c);
                         },
                         "transpose");
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix y = a.value();
  for (std::size_t e = 0; e < y.size(); ++e) y.data[e] += b.value().data[e];
  const auto ai = a.id(), bi = b.id();
  return t.record(std::move(y), {ai, bi},
                  [ai, bi](Tape& tp, std::size_t self) {
                    accumulate(tp.grad_buffer(ai), tp.grad(self));
                    accumulate(tp.grad_buffer(bi), tp.grad(self));
                  },
                  "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Matrix y = a.value();
  for (std::size_t e = 0; e < y.size(); ++e) y.data[e] -= b.value().data[e];
  const auto ai = a.id(), bi = b.id();
  return t.record(std::move(y), {ai, bi},
                  [ai, bi](Tape& tp, std::size_t self) {
                    accumulate(tp.grad_buffer(ai), tp.grad(self));
                    accumulate(tp.grad_buffer(bi), tp.grad(self), -1.0);
                  },
                  "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Matrix y = a.value();
  for (std::size_t e = 0; e < y.size(); ++e) y.data[e] *= b.value().data[e];
  const auto ai = a.id(), bi = b.id();
  return t.record(std::move(y), {ai, bi},
                  [ai, bi](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    if (Matrix* da = tp.grad_buffer(ai))
                      for (std::size_t e = 0; e < dy.size(); ++e) da->data[e] += dy.data[e] * tp.value(bi).data[e];
                    if (Matrix* db = tp.grad_buffer(bi))
                      for (std::size_t e = 0; e < dy.size(); ++e) db->data[e] += dy.data[e] * tp.value(ai).data[e];
                  },
                  "mul");
}

Tensor scale(const Tensor& x, double s) {
  Matrix y = x.value();
  for (double& v : y.data) v *= s;
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, s](Tape& tp, std::size_t self) { accumulate(tp.grad_buffer(xi), tp.grad(self), s); },
                         "scale");
}

Tensor scale_rows(const Tensor& x, const std::vector<double>& factors) {
  Matrix y = x.value();
  if (factors.size() != y.rows)
    throw std::invalid_argument("scale_rows: " + std::to_string(factors.size()) + " factors for " +
                                std::to_string(y.rows) + " rows");
  for (std::size_t r = 0; r < y.rows; ++r)
    for (std::size_t c = 0; c < y.cols; ++c) y(r, c) *= factors[r];
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, factors](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t r = 0; r < dy.rows; ++r)
                               for (std::size_t c = 0; c < dy.cols; ++c) (*dx)(r, c) += dy(r, c) * factors[r];
                         },
                         "scale_rows");
}

Tensor tanh(const Tensor& x) {
  Matrix y = x.value();
  for (double& v : y.data) v = std::tanh(v);
  const auto xi = x.id();
  Tensor out;
  out = x.tape().record(std::move(y), {xi},
                        [xi](Tape& tp, std::size_t self) {
                          const Matrix& dy = tp.grad(self);
                          const Matrix& yv = tp.value(self);
                          if (Matrix* dx = tp.grad_buffer(xi))
                            for (std::size_t e = 0; e < dy.size(); ++e)
                              dx->data[e] += dy.data[e] * (1.0 - yv.data[e] * yv.data[e]);
                        },
                        "tanh");
  return out;
}

Tensor group_norm(const Tensor& x, std::size_t dim) {
  const auto& v = x.value();
  const std::size_t C = channels_of(v, dim, "group_norm");
  Matrix y(v.rows, C);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t k = 0; k < C; ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += v(r, d * C + k) * v(r, d * C + k);
      y(r, k) = std::sqrt(s);
    }
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, dim, C](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           const Matrix& yv = tp.value(self);
                           const Matrix& xv = tp.value(xi);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t r = 0; r < dy.rows; ++r)
                               for (std::size_t k = 0; k < C; ++k) {
                                 const double nrm = yv(r, k);
                                 if (nrm == 0.0) continue;
                                 for (std::size_t d = 0; d < dim; ++d)
                                   (*dx)(r, d * C + k) += dy(r, k) * xv(r, d * C + k) / nrm;
                               }
                         },
                         "group_norm");
}

Tensor l2_norm_rows(const Tensor& x) { return group_norm(x, x.cols()); }

Tensor gate_groups(const Tensor& g, const Tensor& x, std::size_t dim) {
  Tape& t = same_tape(g, x, "gate_groups");
  const auto& xv = x.value();
  const auto& gv = g.value();
  const std::size_t C = channels_of(xv, dim, "gate_groups");
  if (gv.rows != xv.rows || gv.cols != C)
    throw std::invalid_argument("gate_groups: gate " + gv.shape_str() + " for input " + xv.shape_str());
  Matrix y = xv;
  for (std::size_t r = 0; r < y.rows; ++r)
    for (std::size_t d = 0; d < dim; ++d)
      for (std::size_t k = 0; k < C; ++k) y(r, d * C + k) *= gv(r, k);
  const auto gi = g.id(), xi = x.id();
  return t.record(std::move(y), {gi, xi},
                  [gi, xi, dim, C](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    const Matrix& gv2 = tp.value(gi);
                    const Matrix& xv2 = tp.value(xi);
                    Matrix* dg = tp.grad_buffer(gi);
                    Matrix* dx = tp.grad_buffer(xi);
                    for (std::size_t r = 0; r < dy.rows; ++r)
                      for (std::size_t d = 0; d < dim; ++d)
                        for (std::size_t k = 0; k < C; ++k) {
                          const double gy = dy(r, d * C + k);
                          if (dg) (*dg)(r, k) += gy * xv2(r, d * C + k);
                          if (dx) (*dx)(r, d * C + k) += gy * gv2(r, k);
                        }
                  },
                  "gate_groups");
}

Tensor expand_groups(const Tensor& x, const Matrix& v) {
  const auto& xv = x.value();
  if (v.rows != xv.rows) throw std::invalid_argument("expand_groups: row mismatch");
  const std::size_t dim = v.cols, C = xv.cols;
  Matrix y(xv.rows, dim * C);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t d = 0; d < dim; ++d)
      for (std::size_t k = 0; k < C; ++k) y(r, d * C + k) = v(r, d) * xv(r, k);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, v, dim, C](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t r = 0; r < dy.rows; ++r)
                               for (std::size_t d = 0; d < dim; ++d)
                                 for (std::size_t k = 0; k < C; ++k) (*dx)(r, k) += v(r, d) * dy(r, d * C + k);
                         },
                         "expand_groups");
}

Tensor contract_groups(const Tensor& x, const Matrix& v) {
  const auto& xv = x.value();
  if (v.rows != xv.rows) throw std::invalid_argument("contract_groups: row mismatch");
  const std::size_t dim = v.cols;
  const std::size_t C = channels_of(xv, dim, "contract_groups");
  Matrix y(xv.rows, C);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t d = 0; d < dim; ++d)
      for (std::size_t k = 0; k < C; ++k) y(r, k) += v(r, d) * xv(r, d * C + k);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, v, dim, C](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t r = 0; r < dy.rows; ++r)
                               for (std::size_t d = 0; d < dim; ++d)
                                 for (std::size_t k = 0; k < C; ++k) (*dx)(r, d * C + k) += v(r, d) * dy(r, k);
                         },
                         "contract_groups");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Matrix y(rows, cols);
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const auto& v = parts[q].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols; ++c) y(r, offsets[q] + c) = v(r, c);
  }
  return t.record(std::move(y), ids,
                  [ids, offsets](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    for (std::size_t q = 0; q < ids.size(); ++q)
                      if (Matrix* dx = tp.grad_buffer(ids[q]))
                        for (std::size_t r = 0; r < dx->rows; ++r)
                          for (std::size_t c = 0; c < dx->cols; ++c) (*dx)(r, c) += dy(r, offsets[q] + c);
                  },
                  "concat_cols");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = parts[0].tape();
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids, offsets;
  for (const auto& p : parts) {
    if (&p.tape() != &t) throw std::invalid_argument("concat_rows: tensors on different tapes");
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    ids.push_back(p.id());
    offsets.push_back(rows * cols);
    rows += p.rows();
  }
  Matrix y(rows, cols);
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const auto& v = parts[q].value();
    std::copy(v.data.begin(), v.data.end(), y.data.begin() + static_cast<long>(offsets[q]));
  }
  return t.record(std::move(y), ids,
                  [ids, offsets](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    for (std::size_t q = 0; q < ids.size(); ++q)
                      if (Matrix* dx = tp.grad_buffer(ids[q]))
                        for (std::size_t e = 0; e < dx->size(); ++e) dx->data[e] += dy.data[offsets[q] + e];
                  },
                  "concat_rows");
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const auto& v = x.value();
  if (begin > end || end > v.cols) throw std::invalid_argument("slice_cols: bad range");
  Matrix y(v.rows, end - begin);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = begin; c < end; ++c) y(r, c - begin) = v(r, c);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, begin](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t r = 0; r < dy.rows; ++r)
                               for (std::size_t c = 0; c < dy.cols; ++c) (*dx)(r, begin + c) += dy(r, c);
                         },
                         "slice_cols");
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index) {
  const auto& v = x.value();
  Matrix y(index.size(), v.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= v.rows) throw std::out_of_range("gather_rows: index out of range");
    for (std::size_t c = 0; c < v.cols; ++c) y(r, c) = v(index[r], c);
  }
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, index](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t r = 0; r < index.size(); ++r)
                               for (std::size_t c = 0; c < dy.cols; ++c) (*dx)(index[r], c) += dy(r, c);
                         },
                         "gather_rows");
}

Tensor scatter(const Tensor& x, const kernels::Incidence& inc) {
  const auto& v = x.value();
  for (auto s : inc.sources)
    if (s >= v.rows) throw std::out_of_range("scatter: source row out of range");
  Matrix y;
  kernels::scatter(inc, v, y);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, inc](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t t = 0; t < inc.n_targets(); ++t)
                               for (std::size_t e = inc.offsets[t]; e < inc.offsets[t + 1]; ++e)
                                 for (std::size_t c = 0; c < dy.cols; ++c)
                                   (*dx)(inc.sources[e], c) += inc.signs[e] * dy(t, c);
                         },
                         "scatter");
}

Tensor scatter_add_rows(const Tensor& x, const std::vector<long>& targets, std::size_t n_rows) {
  if (targets.size() != x.rows()) throw std::invalid_argument("scatter_add_rows: target count mismatch");
  std::vector<double> ones(targets.size(), 1.0);
  return scatter(x, kernels::build_incidence(targets, ones, n_rows));
}

Tensor scatter_antisymmetric(const Tensor& x, const std::vector<long>& owners,
                             const std::vector<long>& neighbors, std::size_t n_rows) {
  if (owners.size() != x.rows()) throw std::invalid_argument("scatter_antisymmetric: face count mismatch");
  return scatter(x, kernels::build_antisymmetric_incidence(owners, neighbors, n_rows));
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  const auto xi = x.id();
  return x.tape().record(Matrix::scalar(s), {xi},
                         [xi](Tape& tp, std::size_t self) {
                           const double g = tp.grad(self).data[0];
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (double& v : dx->data) v += g;
                         },
                         "sum_all");
}

Tensor div_scalar(const Tensor& x, const Tensor& s) {
  Tape& t = same_tape(x, s, "div_scalar");
  const double sv = s.item();
  if (sv == 0.0) throw std::domain_error("div_scalar: division by zero");
  Matrix y = x.value();
  for (double& v : y.data) v /= sv;
  const auto xi = x.id(), si = s.id();
  return t.record(std::move(y), {xi, si},
                  [xi, si](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    const double sv2 = tp.value(si).data[0];
                    if (Matrix* dx = tp.grad_buffer(xi))
                      for (std::size_t e = 0; e < dy.size(); ++e) dx->data[e] += dy.data[e] / sv2;
                    if (Matrix* ds = tp.grad_buffer(si)) {
                      double acc = 0.0;
                      const Matrix& xv = tp.value(xi);
                      for (std::size_t e = 0; e < dy.size(); ++e) acc += dy.data[e] * xv.data[e];
                      ds->data[0] -= acc / (sv2 * sv2);
                    }
                  },
                  "div_scalar");
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  Tape& t = same_tape(x, s, "mul_scalar");
  const double sv = s.item();
  Matrix y = x.value();
  for (double& v : y.data) v *= sv;
  const auto xi = x.id(), si = s.id();
  return t.record(std::move(y), {xi, si},
                  [xi, si](Tape& tp, std::size_t self) {
                    const Matrix& dy = tp.grad(self);
                    const double sv2 = tp.value(si).data[0];
                    if (Matrix* dx = tp.grad_buffer(xi))
                      for (std::size_t e = 0; e < dy.size(); ++e) dx->data[e] += dy.data[e] * sv2;
                    if (Matrix* ds = tp.grad_buffer(si)) {
                      double acc = 0.0;
                      const Matrix& xv = tp.value(xi);
                      for (std::size_t e = 0; e < dy.size(); ++e) acc += dy.data[e] * xv.data[e];
                      ds->data[0] += acc;
                    }
                  },
                  "mul_scalar");
}

Tensor custom_unary(const Tensor& x, std::function<double(double)> f,
                    std::function<double(double)> df, const char* name) {
  Matrix y = x.value();
  for (double& v : y.data) v = f(v);
  const auto xi = x.id();
  return x.tape().record(std::move(y), {xi},
                         [xi, df](Tape& tp, std::size_t self) {
                           const Matrix& dy = tp.grad(self);
                           const Matrix& xv = tp.value(xi);
                           if (Matrix* dx = tp.grad_buffer(xi))
                             for (std::size_t e = 0; e < dy.size(); ++e) dx->data[e] += dy.data[e] * df(xv.data[e]);
                         },
                         name);
}

}  // namespace fluxsolve::ad
