#include <benchmark/benchmark.h>

#include <vector>

#include "depthkv/allocation.hpp"
#include "depthkv/rng.hpp"

namespace {

void BM_mga_plan(benchmark::State& state) {
  const auto layers = static_cast<std::uint32_t>(state.range(0));
  std::vector<double> metric(layers);
  const depthkv::CounterRng rng(5);
  for (std::uint32_t l = 0; l < layers; ++l) {
    metric[l] = rng.uniform_at(l);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(depthkv::mga_plan(layers, 0.55, metric));
  }
}
BENCHMARK(BM_mga_plan)->Arg(32)->Arg(64)->Arg(128);

void BM_ratios_to_counts(benchmark::State& state) {
  const auto layers = static_cast<std::uint32_t>(state.range(0));
  std::vector<double> metric(layers);
  const depthkv::CounterRng rng(5);
  for (std::uint32_t l = 0; l < layers; ++l) {
    metric[l] = rng.uniform_at(l);
  }
  const auto plan = depthkv::mga_plan(layers, 0.55, metric);
  for (auto _ : state) {
    benchmark::DoNotOptimize(depthkv::ratios_to_counts(plan, 4096));
  }
}
BENCHMARK(BM_ratios_to_counts)->Arg(32)->Arg(128);

}  // namespace
