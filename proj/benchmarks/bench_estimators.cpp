#include <benchmark/benchmark.h>

#include <numbers>

#include "ksd/entropy.hpp"
#include "ksd/lyapunov.hpp"
#include "ksd/systems.hpp"

using namespace ksd;

namespace {

const PhaseState kStart = PhaseState::spin(0.3, 0.4, 0.8660254037844386);

}  // namespace

static void BM_OrbitStats(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  const Partition part = make_partition(top, PartitionSpec::parse("grid:sphere:4x4"));
  for (auto _ : state)
    benchmark::DoNotOptimize(collect_orbit_stats(top, 0.0, part, kStart, std::size_t(state.range(0)), 12));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OrbitStats)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_EnsemblePathStats(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  const Partition part = make_partition(top, PartitionSpec::parse("grid:sphere:2x4"));
  const Ensemble e = sample_canonical(top, {0.0, 0.0, std::size_t(state.range(0)), 2});
  const auto protocol = ControlProtocol::constant(0.0, 12);
  for (auto _ : state) benchmark::DoNotOptimize(collect_path_stats(top, protocol, part, e, 12));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnsemblePathStats)->Arg(20000)->Unit(benchmark::kMillisecond);

static void BM_BlockEntropyCurve(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  const Partition part = make_partition(top, PartitionSpec::parse("grid:sphere:4x4"));
  const PathStats stats = collect_orbit_stats(top, 0.0, part, kStart, 200000, 12);
  for (auto _ : state) benchmark::DoNotOptimize(block_entropy_curve(stats));
}
BENCHMARK(BM_BlockEntropyCurve)->Unit(benchmark::kMillisecond);

static void BM_ReversedVolumeTable(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  const Partition part = make_partition(top, PartitionSpec::parse("grid:sphere:2x2"));
  const auto protocol = ControlProtocol::constant(0.0, 8);
  for (auto _ : state)
    benchmark::DoNotOptimize(ReversedVolumeTable::build(top, protocol, part, 8, std::size_t(state.range(0)), 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReversedVolumeTable)->Arg(20000)->Unit(benchmark::kMillisecond);

static void BM_Lyapunov(benchmark::State& state) {
  KickedTop top(std::numbers::pi / 2, 5.0);
  LyapunovOptions opt;
  opt.iterations = std::size_t(state.range(0));
  opt.transient = 0;
  for (auto _ : state) benchmark::DoNotOptimize(lyapunov_spectrum(top, 0.0, kStart, opt));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Lyapunov)->Arg(100000)->Unit(benchmark::kMillisecond);
