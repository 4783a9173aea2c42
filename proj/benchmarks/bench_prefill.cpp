#include <benchmark/benchmark.h>

#include "depthkv/allocation.hpp"
#include "depthkv/prefill_sim.hpp"
#include "depthkv/trace.hpp"

namespace {

void BM_chunked_prefill(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto chunk = static_cast<std::uint32_t>(state.range(1));
  const auto trace = depthkv::generate_synthetic_trace(2, 2, n, 16, 16, 9);
  depthkv::PrefillConfig config;
  config.chunk_size = chunk;
  config.plan = depthkv::uniform_plan(2, 0.6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(depthkv::run_chunked_prefill(trace, config));
  }
}
BENCHMARK(BM_chunked_prefill)
    ->Args({256, 64})
    ->Args({512, 128})
    ->Args({1024, 256});

void BM_chunked_prefill_full_replay(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto trace = depthkv::generate_synthetic_trace(2, 2, n, 16, 16, 9);
  depthkv::PrefillConfig config;
  config.chunk_size = n / 4;
  config.replay = depthkv::AttentionReplay::full_context;
  config.plan = depthkv::uniform_plan(2, 0.6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(depthkv::run_chunked_prefill(trace, config));
  }
}
BENCHMARK(BM_chunked_prefill_full_replay)->Arg(256)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
