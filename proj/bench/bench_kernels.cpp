#include <benchmark/benchmark.h>

#include <random>

#include "fluxsolve/kernels.hpp"

using namespace fluxsolve;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data) v = u(rng);
  return m;
}

// Ring graph with n cells and n faces, W channels.
struct ScatterCase {
  kernels::Incidence inc;
  Matrix x;
};

ScatterCase ring(std::size_t n, std::size_t w) {
  std::vector<long> owners(n), neighbors(n);
  for (std::size_t f = 0; f < n; ++f) {
    owners[f] = static_cast<long>((f + n - 1) % n);
    neighbors[f] = static_cast<long>(f);
  }
  return {kernels::build_antisymmetric_incidence(owners, neighbors, n), random_matrix(n, w, 1)};
}

template <void (*Fn)(const Matrix&, const Matrix&, Matrix&)>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, 64, 2), b = random_matrix(64, 64, 3);
  Matrix out(n, 64);
  for (auto _ : state) {
    Fn(a, b, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * 64 * 64));
}

template <void (*Fn)(const kernels::Incidence&, const Matrix&, Matrix&)>
void BM_Scatter(benchmark::State& state) {
  const auto c = ring(static_cast<std::size_t>(state.range(0)), 64);
  Matrix out(c.x.rows, c.x.cols);
  for (auto _ : state) {
    Fn(c.inc, c.x, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(c.x.size()));
}

}  // namespace

BENCHMARK(BM_Matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(100)->Arg(10000);
BENCHMARK(BM_Matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(100)->Arg(10000);
BENCHMARK(BM_Scatter<kernels::serial::scatter>)->Name("scatter/serial")->Arg(1000)->Arg(100000);
BENCHMARK(BM_Scatter<kernels::parallel::scatter>)->Name("scatter/parallel")->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();
