#include <benchmark/benchmark.h>

#include <vector>

#include "qrk/quantile.hpp"
#include "qrk/solvers.hpp"
#include "qrk/system.hpp"

namespace {

using namespace qrk;

void BM_SelectQuantile(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  Rng rng(RngHandle{1, 0});
  std::vector<double> base(N);
  for (auto& v : base) v = rng.uniform01();
  std::vector<double> work(N);
  for (auto _ : state) {
    work = base;
    benchmark::DoNotOptimize(select_quantile(work, 0.5));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SelectQuantile)->RangeMultiplier(10)->Range(4, 50000)->Complexity();

void BM_SubsampleDraw(benchmark::State& state) {
  const auto D = static_cast<std::size_t>(state.range(0));
  const auto mode = state.range(1) ? SamplingMode::WithoutReplacement : SamplingMode::WithReplacement;
  SubsampleDrawer drawer(50000, QuantileSpec{0.5, D, mode});
  Rng rng(RngHandle{2, 0});
  IndexSet out;
  for (auto _ : state) {
    drawer.draw(rng, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SubsampleDraw)->ArgsProduct({{4, 40, 5000}, {0, 1}});

// Per-step cost of the solver at the fig1 preset scale (m=50000, n=100) for several D.
void BM_QrkStep(benchmark::State& state) {
  static const LinearSystem sys = generate_system(50000, 100, CorruptionSpec{0.01}, RngHandle{3, 0});
  SolverConfig cfg;
  const bool full = state.range(0) == 0;
  cfg.quantile = QuantileSpec{0.5, full ? 1 : static_cast<std::size_t>(state.range(0)),
                              full ? SamplingMode::FullSample : SamplingMode::WithReplacement};
  cfg.T = 1;
  cfg.seed = RngHandle{4, 0};
  cfg.oracle_flags = false;
  KaczmarzIteration it(sys, cfg, SolverKind::Quantile, Vector::Zero(100));
  for (auto _ : state) benchmark::DoNotOptimize(it.step());
}
BENCHMARK(BM_QrkStep)->Arg(4)->Arg(40)->Arg(5000)->Arg(0);

void BM_RkStep(benchmark::State& state) {
  static const LinearSystem sys = generate_system(50000, 100, CorruptionSpec{0.0}, RngHandle{5, 0});
  SolverConfig cfg;
  cfg.T = 1;
  cfg.seed = RngHandle{6, 0};
  cfg.oracle_flags = false;
  KaczmarzIteration it(sys, cfg, SolverKind::Randomized, Vector::Zero(100));
  for (auto _ : state) benchmark::DoNotOptimize(it.step());
}
BENCHMARK(BM_RkStep);

}  // namespace

BENCHMARK_MAIN();
