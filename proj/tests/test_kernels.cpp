#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "fluxsolve/kernels.hpp"

using namespace fluxsolve;
namespace k = fluxsolve::kernels;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data) v = u(rng);
  return m;
}

}  // namespace

TEST(Kernels, MatmulSmallExample) {
  const Matrix a(2, 2, std::vector<double>{1, 2, 3, 4});
  const Matrix b(2, 1, std::vector<double>{5, 6});
  Matrix out;
  k::serial::matmul(a, b, out);
  EXPECT_EQ(out.data, (std::vector<double>{17, 39}));
}

TEST(Kernels, ParallelMatchesSerialBitwise) {
  const Matrix a = random_matrix(300, 70, 1), b = random_matrix(70, 90, 2), c = random_matrix(300, 90, 3);
  Matrix s, p;
  k::serial::matmul(a, b, s);
  k::parallel::matmul(a, b, p);
  EXPECT_EQ(s.data, p.data);
  k::serial::matmul_tn(a, c, s);
  k::parallel::matmul_tn(a, c, p);
  EXPECT_EQ(s.data, p.data);
  k::serial::matmul_nt(c, b, s);
  k::parallel::matmul_nt(c, b, p);
  EXPECT_EQ(s.data, p.data);
}

TEST(Kernels, TransposedProductsAgreeWithPlainProduct) {
  const Matrix a = random_matrix(5, 3, 4), b = random_matrix(5, 4, 5);
  Matrix at(3, 5);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) at(c, r) = a(r, c);
  Matrix x, y;
  k::serial::matmul_tn(a, b, x);
  k::serial::matmul(at, b, y);
  for (std::size_t e = 0; e < x.size(); ++e) EXPECT_NEAR(x.data[e], y.data[e], 1e-14);
}

TEST(Kernels, AntisymmetricScatterSumsToZero) {
  const std::size_t n = 1000;
  std::vector<long> owners(n), neighbors(n);
  for (std::size_t f = 0; f < n; ++f) {
    owners[f] = static_cast<long>((f + n - 1) % n);
    neighbors[f] = static_cast<long>(f);
  }
  const auto inc = k::build_antisymmetric_incidence(owners, neighbors, n);
  const Matrix x = random_matrix(n, 8, 6);
  Matrix s, p;
  k::serial::scatter(inc, x, s);
  k::parallel::scatter(inc, x, p);
  EXPECT_EQ(s.data, p.data);
  for (std::size_t c = 0; c < 8; ++c) {
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) total += s(t, c);
    EXPECT_NEAR(total, 0.0, 1e-12);
  }
}

TEST(Kernels, IncidenceDropsNegativeTargetsAndSortsSources) {
  const std::vector<long> targets{1, -1, 0, 1};
  const std::vector<double> signs{1.0, 1.0, -1.0, 2.0};
  const auto inc = k::build_incidence(targets, signs, 2);
  ASSERT_EQ(inc.n_targets(), 2u);
  EXPECT_EQ(inc.offsets, (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(inc.sources, (std::vector<std::size_t>{2, 0, 3}));
  EXPECT_EQ(inc.signs, (std::vector<double>{-1.0, 1.0, 2.0}));
}

TEST(Kernels, ThreadEnvironmentVariable) {
  setenv("FLUXSOLVE_THREADS", "1", 1);
  EXPECT_EQ(k::configure_threads(), 1);
  setenv("FLUXSOLVE_THREADS", "zero", 1);
  EXPECT_THROW(k::configure_threads(), ConfigError);
  unsetenv("FLUXSOLVE_THREADS");
  EXPECT_GE(k::configure_threads(), 1);
}
