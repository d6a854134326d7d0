#include <benchmark/benchmark.h>
#include <cmath>

#include "vacsing/gowdy.hpp"
#include "vacsing/hminus.hpp"

using namespace vacsing;

static void bm_hminus_matrix(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  CircleGrid grid(n, 2.0 * M_PI, DerivScheme::FD4);
  gowdy::GowdyState st = gowdy::random_band_limited_state(grid, dim, 0.0, 3, 0.25, 3);
  SelfAdjointSection defect = gowdy::avtd_defect(st);
  SpdField g{st.g};
  for (auto _ : state) {
    HminusResult r = hminus_norm_matrix(defect, g, st.mu, grid);
    benchmark::DoNotOptimize(r.value);
  }
}
BENCHMARK(bm_hminus_matrix)->Args({128, 2})->Args({256, 2})->Args({256, 3});

static void bm_hminus_scalar(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  CircleGrid grid(n, 2.0 * M_PI, DerivScheme::Spectral);
  Field sigma(n), a(n, 1.0);
  for (int j = 0; j < n; ++j) sigma[j] = std::cos(3.0 * grid.point(j));
  for (auto _ : state) {
    HminusResult r = hminus_norm_scalar(sigma, a, grid);
    benchmark::DoNotOptimize(r.value);
  }
}
BENCHMARK(bm_hminus_scalar)->Arg(64)->Arg(256);
