#include <benchmark/benchmark.h>

#include "vacsing/cmcflow.hpp"

using namespace vacsing::cmc;

static void bm_cmc_evolve(benchmark::State& state) {
  Family f = make_kantowski_sachs(1.0);
  MultiWarpedFlow start = f.at(0.05);
  for (auto _ : state) {
    CmcTrajectory traj = evolve_cmc(start, 0.005, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(traj.samples.size());
  }
}
BENCHMARK(bm_cmc_evolve)->Arg(1000)->Arg(4000);

static void bm_curvature_report(benchmark::State& state) {
  Family f = make_kantowski_sachs(1.0);
  for (auto _ : state) {
    CurvatureReport rep = curvature_report(f, {1e-3, 1e-2, 1e-1});
    benchmark::DoNotOptimize(rep.type_i_constant);
  }
}
BENCHMARK(bm_curvature_report);
