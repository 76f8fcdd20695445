#include "fluxsolve/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <string>

#include <omp.h>

namespace fluxsolve::kernels {

namespace {

void check_mm(const Matrix& a, const Matrix& b, std::size_t inner_a, std::size_t inner_b,
              const char* what) {
  if (inner_a != inner_b)
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}

// Row kernel shared by the serial and parallel matmul so both accumulate in
// the same order.
inline void mm_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
  double* o = &out.data[i * out.cols];
  std::fill(o, o + out.cols, 0.0);
  for (std::size_t k = 0; k < a.cols; ++k) {
    const double aik = a.data[i * a.cols + k];
    const double* brow = &b.data[k * b.cols];
    for (std::size_t j = 0; j < b.cols; ++j) o[j] += aik * brow[j];
  }
}

inline void mm_tn_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
  // out row i = sum_r a[r, i] * b[r, :]
  double* o = &out.data[i * out.cols];
  std::fill(o, o + out.cols, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double ari = a.data[r * a.cols + i];
    const double* brow = &b.data[r * b.cols];
    for (std::size_t j = 0; j < b.cols; ++j) o[j] += ari * brow[j];
  }
}

inline void mm_nt_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
  const double* arow = &a.data[i * a.cols];
  for (std::size_t j = 0; j < b.rows; ++j) {
    const double* brow = &b.data[j * b.cols];
    double s = 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
    out.data[i * out.cols + j] = s;
  }
}

inline void scatter_row(const Incidence& inc, const Matrix& x, Matrix& out, std::size_t t) {
  double* o = &out.data[t * out.cols];
  std::fill(o, o + out.cols, 0.0);
  for (std::size_t e = inc.offsets[t]; e < inc.offsets[t + 1]; ++e) {
    const double s = inc.signs[e];
    const double* xr = &x.data[inc.sources[e] * x.cols];
    for (std::size_t c = 0; c < x.cols; ++c) o[c] += s * xr[c];
  }
}

}  // namespace

Incidence build_incidence(std::span<const long> targets, std::span<const double> signs,
                          std::size_t n_targets) {
  if (targets.size() != signs.size()) throw std::invalid_argument("build_incidence: size mismatch");
  Incidence inc;
  inc.offsets.assign(n_targets + 1, 0);
  for (long t : targets) {
    if (t >= static_cast<long>(n_targets)) throw std::out_of_range("build_incidence: target");
    if (t >= 0) ++inc.offsets[static_cast<std::size_t>(t) + 1];
  }
  std::partial_sum(inc.offsets.begin(), inc.offsets.end(), inc.offsets.begin());
  inc.sources.resize(inc.offsets.back());
  inc.signs.resize(inc.offsets.back());
  std::vector<std::size_t> cursor(inc.offsets.begin(), inc.offsets.end() - 1);
  // sources visited in increasing order, so each target's list is sorted by source id
  for (std::size_t s = 0; s < targets.size(); ++s) {
    if (targets[s] < 0) continue;
    auto& c = cursor[static_cast<std::size_t>(targets[s])];
    inc.sources[c] = s;
    inc.signs[c] = signs[s];
    ++c;
  }
  return inc;
}

Incidence build_antisymmetric_incidence(std::span<const long> owners,
                                        std::span<const long> neighbors,
                                        std::size_t n_targets) {
  if (owners.size() != neighbors.size())
    throw std::invalid_argument("build_antisymmetric_incidence: size mismatch");
  const std::size_t nf = owners.size();
  // a half-edge list: rows [0, nf) are owner sides, [nf, 2nf) neighbor sides
  std::vector<long> targets(2 * nf);
  std::vector<double> signs(2 * nf);
  for (std::size_t f = 0; f < nf; ++f) {
    targets[f] = owners[f];
    signs[f] = 1.0;
    targets[nf + f] = neighbors[f];
    signs[nf + f] = -1.0;
  }
  Incidence inc = build_incidence(targets, signs, n_targets);
  for (auto& s : inc.sources) s %= nf;
  // re-sort each target's list by face id so accumulation order is (target, face)
  for (std::size_t t = 0; t < n_targets; ++t) {
    std::vector<std::pair<std::size_t, double>> entries;
    for (std::size_t e = inc.offsets[t]; e < inc.offsets[t + 1]; ++e)
      entries.emplace_back(inc.sources[e], inc.signs[e]);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      inc.sources[inc.offsets[t] + k] = entries[k].first;
      inc.signs[inc.offsets[t] + k] = entries[k].second;
    }
  }
  return inc;
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_mm(a, b, a.cols, b.rows, "matmul");
  out = Matrix(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) mm_row(a, b, out, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  check_mm(a, b, a.rows, b.rows, "matmul_tn");
  out = Matrix(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i) mm_tn_row(a, b, out, i);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_mm(a, b, a.cols, b.cols, "matmul_nt");
  out = Matrix(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) mm_nt_row(a, b, out, i);
}

void scatter(const Incidence& inc, const Matrix& x, Matrix& out) {
  out = Matrix(inc.n_targets(), x.cols);
  for (std::size_t t = 0; t < inc.n_targets(); ++t) scatter_row(inc, x, out, t);
}

}  // namespace serial

namespace parallel {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_mm(a, b, a.cols, b.rows, "matmul");
  out = Matrix(a.rows, b.cols);
  const long n = static_cast<long>(a.rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) mm_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  check_mm(a, b, a.rows, b.rows, "matmul_tn");
  out = Matrix(a.cols, b.cols);
  const long n = static_cast<long>(a.cols);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) mm_tn_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_mm(a, b, a.cols, b.cols, "matmul_nt");
  out = Matrix(a.rows, b.rows);
  const long n = static_cast<long>(a.rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) mm_nt_row(a, b, out, static_cast<std::size_t>(i));
}

void scatter(const Incidence& inc, const Matrix& x, Matrix& out) {
  out = Matrix(inc.n_targets(), x.cols);
  const long n = static_cast<long>(inc.n_targets());
#pragma omp parallel for schedule(static)
  for (long t = 0; t < n; ++t) scatter_row(inc, x, out, static_cast<std::size_t>(t));
}

}  // namespace parallel

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows * a.cols * b.cols >= parallel_threshold && max_threads() > 1)
    parallel::matmul(a, b, out);
  else
    serial::matmul(a, b, out);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows * a.cols * b.cols >= parallel_threshold && max_threads() > 1)
    parallel::matmul_tn(a, b, out);
  else
    serial::matmul_tn(a, b, out);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows * a.cols * b.rows >= parallel_threshold && max_threads() > 1)
    parallel::matmul_nt(a, b, out);
  else
    serial::matmul_nt(a, b, out);
}

void scatter(const Incidence& inc, const Matrix& x, Matrix& out) {
  if (inc.sources.size() * x.cols >= parallel_threshold && max_threads() > 1)
    parallel::scatter(inc, x, out);
  else
    serial::scatter(inc, x, out);
}

int configure_threads() {
  if (const char* env = std::getenv("FLUXSOLVE_THREADS")) {
    const std::string text(env);
    std::size_t pos = 0;
    int cap = 0;
    try {
      cap = std::stoi(text, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != text.size() || cap < 1)
      throw ConfigError("FLUXSOLVE_THREADS must be a positive integer, got '" + text + "'");
    omp_set_num_threads(std::min(cap, omp_get_num_procs()));
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace fluxsolve::kernels
