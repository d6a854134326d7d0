#include <benchmark/benchmark.h>
#include <cmath>

#include "vacsing/gowdy.hpp"

using namespace vacsing;
using namespace vacsing::gowdy;

static void bm_gowdy_evolve(benchmark::State& state, DerivScheme scheme) {
  const int n = static_cast<int>(state.range(0));
  CircleGrid grid(n, 2.0 * M_PI, scheme);
  GowdyState st = random_band_limited_state(grid, 2, 0.0, 1, 0.25, 3);
  EvolveOptions opts;
  opts.output_count = 2;
  for (auto _ : state) {
    Trajectory traj = evolve(st, 0.25, opts);
    benchmark::DoNotOptimize(traj.steps);
  }
}
BENCHMARK_CAPTURE(bm_gowdy_evolve, spectral, DerivScheme::Spectral)->Arg(128)->Arg(256);
BENCHMARK_CAPTURE(bm_gowdy_evolve, fd4, DerivScheme::FD4)->Arg(128)->Arg(256)->Arg(512);
