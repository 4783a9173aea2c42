#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthkv/allocation.hpp"
#include "depthkv/importance.hpp"
#include "depthkv/trace.hpp"

namespace depthkv {

inline constexpr std::uint32_t kDefaultChunkSize = 1024;

enum class ScorerKind { h2o, value_aware_l1, value_aware_l2 };

const char* scorer_name(ScorerKind scorer);

// How attention is recomputed during chunked scoring. `visible_renormalized`
// softmaxes over the retained tokens plus in-chunk predecessors, the way a
// model with an evicted cache actually attends. `full_context` replays the
// softmax over the whole prefix and only restricts score accumulation to
// surviving tokens.
enum class AttentionReplay { visible_renormalized, full_context };

struct PrefillConfig {
  std::uint32_t chunk_size = kDefaultChunkSize;
  ScorerKind scorer = ScorerKind::h2o;
  AttentionReplay replay = AttentionReplay::visible_renormalized;
  LayerBudgetPlan plan;
};

struct LayerCache {
  std::uint32_t layer = 0;
  std::uint32_t budget = 0;
  std::vector<std::uint32_t> retained;  // ascending token indices
  std::vector<double> scores;           // scorer-applied importance, parallel to retained
};

struct PrunedCache {
  std::vector<LayerCache> layers;
  std::uint64_t seen_tokens = 0;
};

// Chunked prefill with per-chunk importance updates and per-layer eviction.
// After each chunk every layer keeps its top-B_l tokens (ties to the lower
// index); evicted tokens never re-enter. The final retained count per layer
// is min(B_l, N).
PrunedCache run_chunked_prefill(const AttentionTrace& trace,
                                const PrefillConfig& config);

// Number of stored scalars: sum over layers of |retained| * H * (d_k + d_v).
std::uint64_t memory_footprint(const PrunedCache& cache,
                               const TraceHeader& header);

struct PlanRunReport {
  std::string plan_name;
  LayerCounts counts;
  PrunedCache cache;
  std::uint64_t footprint_entries = 0;
  // Jaccard overlap of each layer's retained set with the full-sequence
  // top-B_l selection of the same scorer.
  std::vector<double> jaccard_vs_full;
};

struct ComparisonReport {
  std::uint32_t chunk_size = kDefaultChunkSize;
  ScorerKind scorer = ScorerKind::h2o;
  std::vector<PlanRunReport> plans;
};

// Runs the simulator once per plan. All plans must share the layer count.
ComparisonReport compare_plans(const AttentionTrace& trace,
                               const std::vector<LayerBudgetPlan>& plans,
                               std::uint32_t chunk_size, ScorerKind scorer,
                               AttentionReplay replay);

// {"plan_name", "per_layer": [{"layer", "budget", "retained",
//  "score_summary"}], "footprint_entries", "seen_tokens"}.
std::string prefill_report_to_json(const std::string& plan_name,
                                   const PrunedCache& cache,
                                   const TraceHeader& header);

std::string comparison_report_to_json(const ComparisonReport& report);

}  // namespace depthkv
