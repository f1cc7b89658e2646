#include "dentseg/components.hpp"
#include "dentseg/phantom.hpp"

#include <benchmark/benchmark.h>

using namespace dentseg;

static void BM_ConnectedComponents(benchmark::State& state) {
  PhantomSpec spec;
  const int extent = int(state.range(0));
  spec.dims = {extent, extent, extent};
  const Phantom ph = generate_phantom(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(connected_components(ph.labels, 1, Connectivity::TwentySix));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(ph.labels.size()));
}
BENCHMARK(BM_ConnectedComponents)->Arg(64)->Arg(96)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_MandibleFilter(benchmark::State& state) {
  PhantomSpec spec;
  const int extent = int(state.range(0));
  spec.dims = {extent, extent, extent};
  const Phantom ph = generate_phantom(spec);
  PostprocessConfig cfg;
  cfg.min_mandible_voxels = 500;
  for (auto _ : state) {
    benchmark::DoNotOptimize(filter_small_mandible(ph.labels, cfg));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(ph.labels.size()));
}
BENCHMARK(BM_MandibleFilter)->Arg(64)->Arg(96)->Unit(benchmark::kMillisecond);
