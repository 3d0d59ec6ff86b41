#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "wavemap/geometry.hpp"
#include "wavemap/kernels.hpp"

using namespace wavemap;
using kernels::Exec;

namespace {

std::vector<double> profile(std::size_t n, double dr) {
  std::vector<double> psi(n);
  for (std::size_t i = 0; i < n; ++i) psi[i] = 2.0 * std::atan(static_cast<double>(i) * dr);
  return psi;
}

template <bool Parallel>
void BM_acceleration(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const double dr = 40.0 / static_cast<double>(n - 1);
  const Metric sphere = Metric::sphere();
  const auto src = kernels::Source::nonlinear(sphere);
  const auto psi = profile(n, dr);
  std::vector<double> acc(n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::acceleration_parallel(src, psi.data(), acc.data(), n, dr);
    else
      kernels::acceleration_serial(src, psi.data(), acc.data(), n, dr);
    benchmark::DoNotOptimize(acc.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n));
}

template <Exec E>
void BM_block_sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto psi = profile(n, 1e-3);
  for (auto _ : state) {
    double s = kernels::block_sum(0, n, [&](std::size_t i) { return std::sin(psi[i]) * std::sin(psi[i]); }, E);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n));
}

}  // namespace

BENCHMARK(BM_acceleration<false>)->Name("acceleration/serial")->RangeMultiplier(4)->Range(4096, 262144);
BENCHMARK(BM_acceleration<true>)->Name("acceleration/parallel")->RangeMultiplier(4)->Range(4096, 262144);
BENCHMARK(BM_block_sum<Exec::serial>)->Name("block_sum/serial")->RangeMultiplier(4)->Range(4096, 262144);
BENCHMARK(BM_block_sum<Exec::parallel>)->Name("block_sum/parallel")->RangeMultiplier(4)->Range(4096, 262144);

BENCHMARK_MAIN();
