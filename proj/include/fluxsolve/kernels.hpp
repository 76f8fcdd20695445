#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fluxsolve/common.hpp"

// Dense and scatter kernels. Each kernel has a serial reference version and
// an OpenMP version with identical per-element arithmetic order, so both
// produce bitwise-identical results; the dispatching wrapper picks the
// parallel one once the work is large enough to amortize thread startup.
namespace fluxsolve::kernels {

// Per-target incidence lists sorted by (target, source id). Used to turn a
// scatter into a deterministic gather.
struct Incidence {
  std::vector<std::size_t> offsets;  // size n_targets + 1
  std::vector<std::size_t> sources;
  std::vector<double> signs;

  std::size_t n_targets() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

// Builds incidence for "row s adds sign_s * x[s] into target[s]".
// Entries with target < 0 are dropped.
Incidence build_incidence(std::span<const long> targets, std::span<const double> signs,
                          std::size_t n_targets);

// Owner receives +x[f], neighbor (if >= 0) receives -x[f].
Incidence build_antisymmetric_incidence(std::span<const long> owners,
                                        std::span<const long> neighbors,
                                        std::size_t n_targets);

namespace serial {
// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out = a^T * b
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
// out[t] = sum over incident sources s of sign_s * x[s]
void scatter(const Incidence& inc, const Matrix& x, Matrix& out);
}  // namespace serial

namespace parallel {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void scatter(const Incidence& inc, const Matrix& x, Matrix& out);
}  // namespace parallel

// Dispatching entry points.
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void scatter(const Incidence& inc, const Matrix& x, Matrix& out);

// Work size (multiply-adds) above which the OpenMP versions are used.
inline constexpr std::size_t parallel_threshold = 1u << 17;

// Reads FLUXSOLVE_THREADS and caps the OpenMP team size accordingly.
// Returns the resulting maximum thread count.
int configure_threads();
int max_threads();

}  // namespace fluxsolve::kernels
