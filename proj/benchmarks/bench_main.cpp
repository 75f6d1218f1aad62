#include "shrinkdim/cantor.hpp"
#include "shrinkdim/density.hpp"
#include "shrinkdim/orbit.hpp"
#include "shrinkdim/partition.hpp"
#include "shrinkdim/pressure.hpp"
#include "shrinkdim/shrinktarget.hpp"

#include <benchmark/benchmark.h>

using namespace shrinkdim;

namespace {

const Family& beta() {
  static const Family f = Family::beta({1.9, 2.0});
  return f;
}

void BM_ForcedOrbit(benchmark::State& state) {
  const StartPoint x = StartPoint::constant(1.0);
  const int n = static_cast<int>(state.range(0));
  const auto itin = run_orbit(beta(), x, 1.95, n).itinerary;
  double b = 1.95;
  for (auto _ : state) {
    benchmark::DoNotOptimize(xi_forced(beta(), x, b, itin));
    b += 1e-15;
  }
}
BENCHMARK(BM_ForcedOrbit)->Arg(10)->Arg(40)->Arg(160);

void BM_Partition(benchmark::State& state) {
  const StartPoint x = StartPoint::constant(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(continuity_partition(beta(), x, beta().range(), state.range(0)));
}
BENCHMARK(BM_Partition)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_PressureTable(benchmark::State& state) {
  const StartPoint x = StartPoint::constant(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(build_pressure_table(beta(), x, beta().range(), {8, 12}));
}
BENCHMARK(BM_PressureTable)->Unit(benchmark::kMillisecond);

void BM_Cover(benchmark::State& state) {
  const StartPoint x = StartPoint::constant(1.0);
  const auto part = continuity_partition(beta(), x, beta().range(), 12);
  for (auto _ : state) benchmark::DoNotOptimize(build_cover(beta(), x, part, 0.5, 1.0));
}
BENCHMARK(BM_Cover)->Unit(benchmark::kMillisecond);

void BM_UlamDensity(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(ulam_density(beta(), 1.95, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_UlamDensity)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_CantorLevel(benchmark::State& state) {
  const Family f = Family::markov_equal(2);
  const StartPoint x = StartPoint::identity();
  const ParamInterval seed = select_seed(f, x, 8, 0.05);
  CantorParams p;
  p.levels = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_cantor(f, x, seed, p));
}
BENCHMARK(BM_CantorLevel)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
