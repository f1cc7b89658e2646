#include "dentseg/phantom.hpp"
#include "dentseg/preprocess.hpp"

#include <benchmark/benchmark.h>

using namespace dentseg;

static void BM_ResampleTrilinear(benchmark::State& state) {
  PhantomSpec spec;
  const int extent = int(state.range(0));
  spec.dims = {extent, extent, extent};
  const Phantom ph = generate_phantom(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(resample(ph.image, {0.6, 0.6, 0.6}, Interp::Trilinear));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(ph.image.size()));
}
BENCHMARK(BM_ResampleTrilinear)->Arg(96)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_ResampleNearestLabels(benchmark::State& state) {
  PhantomSpec spec;
  const int extent = int(state.range(0));
  spec.dims = {extent, extent, extent};
  const Phantom ph = generate_phantom(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(resample(ph.labels, {0.6, 0.6, 0.6}));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(ph.labels.size()));
}
BENCHMARK(BM_ResampleNearestLabels)->Arg(96)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
