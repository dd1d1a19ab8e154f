#include <benchmark/benchmark.h>

#include <numbers>

#include "ksd/ensemble.hpp"
#include "ksd/systems.hpp"

using namespace ksd;

static void BM_KickedTopStep(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  PhaseState s = PhaseState::spin(0.3, 0.4, 0.8660254037844386);
  for (auto _ : state) {
    s = top.step(s, 0.0);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_KickedTopStep);

static void BM_KickedTopTangent(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  const PhaseState s = PhaseState::spin(0.3, 0.4, 0.8660254037844386);
  for (auto _ : state) benchmark::DoNotOptimize(top.tangent(s, 0.0));
}
BENCHMARK(BM_KickedTopTangent);

// Constant lambda hits the cached step matrix; a ramp changes it every step.
static void BM_OscillatorStep(benchmark::State& state) {
  DrivenOscillator osc;
  PhaseState s = PhaseState::planar(0.7, -0.2);
  const bool ramp = state.range(0) != 0;
  double lambda = 1.0;
  for (auto _ : state) {
    if (ramp) lambda = lambda > 4.0 ? 1.0 : lambda + 1e-4;
    s = osc.step(s, lambda);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_OscillatorStep)->Arg(0)->Arg(1);

static void BM_CanonicalSampling(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_canonical(top, {1.0, 0.0, std::size_t(state.range(0)), 1}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CanonicalSampling)->Arg(10000);
BENCHMARK_MAIN();
