#include "dentseg/phantom.hpp"
#include "dentseg/staple.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace dentseg;

namespace {

std::vector<LabelGrid> phantom_raters(int extent, int num_raters, double flip_rate) {
  PhantomSpec spec;
  spec.dims = {extent, extent, extent};
  const Phantom ph = generate_phantom(spec);
  std::vector<LabelGrid> raters;
  for (int k = 0; k < num_raters; ++k) {
    RaterNoise noise;
    noise.flip_rate = flip_rate;
    noise.seed = std::uint64_t(k + 1);
    raters.push_back(simulate_rater(ph.labels, noise));
  }
  return raters;
}

} // namespace

static void BM_StapleFuse(benchmark::State& state) {
  const auto raters = phantom_raters(int(state.range(0)), 5, 0.04);
  FusionConfig cfg;
  cfg.num_labels = 54;
  for (auto _ : state) {
    benchmark::DoNotOptimize(staple_fuse(raters, cfg));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(raters.front().size()));
}
BENCHMARK(BM_StapleFuse)->Arg(48)->Arg(64)->Arg(96)->Unit(benchmark::kMillisecond);

static void BM_MajorityVote(benchmark::State& state) {
  const auto raters = phantom_raters(int(state.range(0)), 5, 0.04);
  for (auto _ : state) {
    benchmark::DoNotOptimize(majority_vote(raters));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(raters.front().size()));
}
BENCHMARK(BM_MajorityVote)->Arg(64)->Arg(96)->Unit(benchmark::kMillisecond);
