#include <benchmark/benchmark.h>
#include <cmath>

#include "vacsing/circle.hpp"
#include "vacsing/spd.hpp"

using namespace vacsing;

static void bm_derivative(benchmark::State& state, DerivScheme scheme) {
  const int n = static_cast<int>(state.range(0));
  CircleGrid grid(n, 2.0 * M_PI, scheme);
  Field f(n), df(n);
  for (int j = 0; j < n; ++j) f[j] = std::exp(std::sin(grid.point(j)));
  for (auto _ : state) {
    grid.derivative(f.data(), df.data());
    benchmark::DoNotOptimize(df.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK_CAPTURE(bm_derivative, spectral, DerivScheme::Spectral)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK_CAPTURE(bm_derivative, fd4, DerivScheme::FD4)->Arg(128)->Arg(256)->Arg(512);

static void bm_expm(benchmark::State& state) {
  Matrix a(3, 3);
  a << 0.1, 0.3, -0.2, 0.4, -0.1, 0.2, 0.05, -0.3, 0.15;
  for (auto _ : state) benchmark::DoNotOptimize(expm(a));
}
BENCHMARK(bm_expm);
