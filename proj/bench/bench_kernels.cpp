#include <benchmark/benchmark.h>

#include <vector>

#include "greendrl/kernels.hpp"
#include "greendrl/rng.hpp"

namespace k = greendrl::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  greendrl::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = greendrl::uniform01(rng) - 0.5;
  return v;
}

template <bool Omp>
void BM_affine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = random_vec(n * n, 1), b = random_vec(n, 2), x = random_vec(n, 3);
  std::vector<double> y(n);
  for (auto _ : state) {
    if constexpr (Omp)
      k::affine_omp(w, n, n, x, b, y);
    else
      k::affine_serial(w, n, n, x, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}

template <bool Omp>
void BM_gaussian_mixing(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> coords(n);
  for (std::size_t i = 0; i < n; ++i) coords[i] = static_cast<double>(i);
  std::vector<double> m(n * n);
  for (auto _ : state) {
    if constexpr (Omp)
      k::gaussian_mixing_omp(coords, 1, 0.3, 1.5, 1.0, m);
    else
      k::gaussian_mixing_serial(coords, 1, 0.3, 1.5, 1.0, m);
    benchmark::DoNotOptimize(m.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}

}  // namespace

BENCHMARK(BM_affine<false>)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_affine<true>)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_gaussian_mixing<false>)->Arg(32)->Arg(256)->Arg(1024);
BENCHMARK(BM_gaussian_mixing<true>)->Arg(32)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
