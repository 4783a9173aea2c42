#include <benchmark/benchmark.h>

#include "depthkv/importance.hpp"
#include "depthkv/trace.hpp"

namespace {

void BM_h2o_importance(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto trace = depthkv::generate_synthetic_trace(1, 4, n, 16, 16, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(depthkv::h2o_importance(trace, 0));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_h2o_importance)->Arg(256)->Arg(512)->Arg(1024)->Complexity();

void BM_value_aware_importance(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto trace = depthkv::generate_synthetic_trace(1, 4, n, 16, 16, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        depthkv::value_aware_importance(trace, 0, depthkv::ValueNorm::l1));
  }
}
BENCHMARK(BM_value_aware_importance)->Arg(256)->Arg(512);

void BM_select_top_tokens(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto trace = depthkv::generate_synthetic_trace(1, 1, n, 8, 8, 2);
  const auto scores = depthkv::h2o_importance(trace, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(depthkv::select_top_tokens(scores, n / 2));
  }
}
BENCHMARK(BM_select_top_tokens)->Arg(1024)->Arg(4096);

}  // namespace
