#include "depthkv/prefill_sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "attention_kernels.hpp"
#include "depthkv/errors.hpp"

namespace depthkv {

namespace {

struct LayerScratch {
  std::vector<std::uint32_t> alive;  // ascending token indices
  std::vector<double> acc;           // accumulated head-mean attention, parallel
};

// Keeps the top-`budget` alive tokens by scorer-applied key, ties to the
// lower token index; survivors stay in ascending index order.
void evict_to_budget(LayerScratch& state, std::uint32_t budget,
                     const std::vector<double>& magnitudes) {
  if (state.alive.size() <= budget) return;

  std::vector<std::size_t> order(state.alive.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t j) {
    return magnitudes.empty() ? state.acc[j]
                              : magnitudes[state.alive[j]] * state.acc[j];
  };
  std::partial_sort(order.begin(), order.begin() + budget, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ka = key(a);
                      const double kb = key(b);
                      if (ka != kb) return ka > kb;
                      return state.alive[a] < state.alive[b];
                    });
  order.resize(budget);
  std::sort(order.begin(), order.end());  // restore index order

  std::vector<std::uint32_t> alive;
  std::vector<double> acc;
  alive.reserve(budget);
  acc.reserve(budget);
  for (std::size_t j : order) {
    alive.push_back(state.alive[j]);
    acc.push_back(state.acc[j]);
  }
  state.alive = std::move(alive);
  state.acc = std::move(acc);
}

LayerCache simulate_layer(const AttentionTrace& trace, std::uint32_t layer,
                          std::uint32_t budget, const PrefillConfig& config,
                          const std::vector<double>& magnitudes) {
  const std::uint32_t n = trace.seq_len();
  const std::uint32_t heads = trace.num_heads();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(trace.key_dim()));
  const double inv_heads = 1.0 / static_cast<double>(heads);

  LayerScratch state;
  std::vector<double> logits(n);

  for (std::uint32_t chunk_start = 0; chunk_start < n;
       chunk_start += config.chunk_size) {
    const std::uint32_t chunk_end =
        std::min<std::uint64_t>(n, static_cast<std::uint64_t>(chunk_start) +
                                       config.chunk_size);
    const std::size_t retained_count = state.alive.size();
    for (std::uint32_t i = chunk_start; i < chunk_end; ++i) {
      state.alive.push_back(i);
      state.acc.push_back(0.0);
    }

    for (std::uint32_t h = 0; h < heads; ++h) {
      for (std::uint32_t i = chunk_start; i < chunk_end; ++i) {
        const auto q = trace.q_row(layer, h, i);
        // retained tokens plus in-chunk predecessors, self included
        const std::size_t visible = retained_count + (i - chunk_start) + 1;

        if (config.replay == AttentionReplay::visible_renormalized) {
          for (std::size_t j = 0; j < visible; ++j) {
            logits[j] =
                detail::dot_f(q, trace.k_row(layer, h, state.alive[j])) * inv_scale;
          }
          detail::softmax_inplace({logits.data(), visible});
          for (std::size_t j = 0; j + 1 < visible; ++j) {
            state.acc[j] += logits[j] * inv_heads;
          }
        } else {
          // full-context replay: softmax over the whole prefix, accumulate
          // only into surviving tokens
          for (std::uint32_t j = 0; j <= i; ++j) {
            logits[j] = detail::dot_f(q, trace.k_row(layer, h, j)) * inv_scale;
          }
          detail::softmax_inplace({logits.data(), static_cast<std::size_t>(i) + 1});
          for (std::size_t j = 0; j + 1 < visible; ++j) {
            state.acc[j] += logits[state.alive[j]] * inv_heads;
          }
        }
      }
    }

    evict_to_budget(state, budget, magnitudes);
  }

  LayerCache cache;
  cache.layer = layer;
  cache.budget = budget;
  cache.retained = state.alive;
  cache.scores.resize(state.acc.size());
  for (std::size_t j = 0; j < state.acc.size(); ++j) {
    cache.scores[j] = magnitudes.empty()
                          ? state.acc[j]
                          : magnitudes[state.alive[j]] * state.acc[j];
  }
  return cache;
}

std::vector<double> scorer_magnitudes(const AttentionTrace& trace,
                                      std::uint32_t layer, ScorerKind scorer) {
  switch (scorer) {
    case ScorerKind::h2o:
      return {};
    case ScorerKind::value_aware_l1:
      return value_magnitudes(trace, layer, ValueNorm::l1,
                              ValueAggregation::head_mean_vector);
    case ScorerKind::value_aware_l2:
      return value_magnitudes(trace, layer, ValueNorm::l2,
                              ValueAggregation::head_mean_vector);
  }
  return {};
}

}  // namespace

const char* scorer_name(ScorerKind scorer) {
  switch (scorer) {
    case ScorerKind::h2o: return "h2o";
    case ScorerKind::value_aware_l1: return "value_aware_l1";
    case ScorerKind::value_aware_l2: return "value_aware_l2";
  }
  return "unknown";
}

PrunedCache run_chunked_prefill(const AttentionTrace& trace,
                                const PrefillConfig& config) {
  if (config.chunk_size == 0) {
    throw std::invalid_argument("chunk size must be >= 1");
  }
  if (config.plan.num_layers != trace.num_layers()) {
    throw std::invalid_argument(
        "plan has " + std::to_string(config.plan.num_layers) +
        " layers but trace has " + std::to_string(trace.num_layers()));
  }

  const LayerCounts counts = ratios_to_counts(config.plan, trace.seq_len());
  for (std::uint32_t b : counts.counts) {
    if (b > trace.seq_len()) {
      throw std::invalid_argument("plan count exceeds sequence length");
    }
  }

  const std::uint32_t layers = trace.num_layers();
  PrunedCache cache;
  cache.seen_tokens = trace.seq_len();
  cache.layers.resize(layers);

  // Layers are independent; fan them out and join in order.
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw == 1 || layers == 1) {
    for (std::uint32_t l = 0; l < layers; ++l) {
      cache.layers[l] = simulate_layer(trace, l, counts.counts[l], config,
                                       scorer_magnitudes(trace, l, config.scorer));
    }
    return cache;
  }

  std::vector<std::future<LayerCache>> futures;
  futures.reserve(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    futures.push_back(std::async(std::launch::async, [&trace, l, &counts, &config] {
      return simulate_layer(trace, l, counts.counts[l], config,
                            scorer_magnitudes(trace, l, config.scorer));
    }));
  }
  for (std::uint32_t l = 0; l < layers; ++l) {
    cache.layers[l] = futures[l].get();
  }
  return cache;
}

std::uint64_t memory_footprint(const PrunedCache& cache,
                               const TraceHeader& header) {
  std::uint64_t entries = 0;
  for (const auto& layer : cache.layers) {
    entries += static_cast<std::uint64_t>(layer.retained.size()) *
               header.num_heads * (header.key_dim + header.value_dim);
  }
  return entries;
}

ComparisonReport compare_plans(const AttentionTrace& trace,
                               const std::vector<LayerBudgetPlan>& plans,
                               std::uint32_t chunk_size, ScorerKind scorer,
                               AttentionReplay replay) {
  if (plans.empty()) {
    throw std::invalid_argument("compare_plans needs at least one plan");
  }
  for (const auto& plan : plans) {
    if (plan.num_layers != plans.front().num_layers) {
      throw std::invalid_argument("compared plans must share the layer count");
    }
    if (std::abs(plan.global_ratio - plans.front().global_ratio) > 1e-9) {
      throw std::invalid_argument("compared plans must share the global ratio");
    }
  }

  ComparisonReport report;
  report.chunk_size = chunk_size;
  report.scorer = scorer;

  // Full-sequence top-k per layer, the no-chunking reference selection.
  const std::uint32_t layers = trace.num_layers();
  std::vector<ImportanceScores> full_scores(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    switch (scorer) {
      case ScorerKind::h2o:
        full_scores[l] = h2o_importance(trace, l);
        break;
      case ScorerKind::value_aware_l1:
        full_scores[l] = value_aware_importance(trace, l, ValueNorm::l1);
        break;
      case ScorerKind::value_aware_l2:
        full_scores[l] = value_aware_importance(trace, l, ValueNorm::l2);
        break;
    }
  }

  for (const auto& plan : plans) {
    PrefillConfig config;
    config.chunk_size = chunk_size;
    config.scorer = scorer;
    config.replay = replay;
    config.plan = plan;

    PlanRunReport run;
    run.plan_name = plan.strategy;
    run.counts = ratios_to_counts(plan, trace.seq_len());
    run.cache = run_chunked_prefill(trace, config);
    run.footprint_entries = memory_footprint(run.cache, trace.header());
    run.jaccard_vs_full.resize(layers);
    for (std::uint32_t l = 0; l < layers; ++l) {
      const RetainedSet full = select_top_tokens(
          full_scores[l], static_cast<std::uint32_t>(run.cache.layers[l].retained.size()));
      const auto& sim = run.cache.layers[l].retained;
      std::vector<std::uint32_t> inter;
      std::set_intersection(sim.begin(), sim.end(), full.indices.begin(),
                            full.indices.end(), std::back_inserter(inter));
      const std::size_t uni = sim.size() + full.indices.size() - inter.size();
      run.jaccard_vs_full[l] =
          uni == 0 ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
    }
    report.plans.push_back(std::move(run));
  }
  return report;
}

namespace {

nlohmann::json layer_to_json(const LayerCache& layer) {
  double min_score = 0.0, max_score = 0.0, mean_score = 0.0;
  if (!layer.scores.empty()) {
    min_score = *std::min_element(layer.scores.begin(), layer.scores.end());
    max_score = *std::max_element(layer.scores.begin(), layer.scores.end());
    mean_score = std::accumulate(layer.scores.begin(), layer.scores.end(), 0.0) /
                 static_cast<double>(layer.scores.size());
  }
  return {{"layer", layer.layer},
          {"budget", layer.budget},
          {"retained", layer.retained},
          {"score_summary",
           {{"min", min_score}, {"max", max_score}, {"mean", mean_score}}}};
}

nlohmann::json run_to_json(const std::string& plan_name, const PrunedCache& cache,
                           std::uint64_t footprint_entries) {
  nlohmann::json per_layer = nlohmann::json::array();
  for (const auto& layer : cache.layers) {
    per_layer.push_back(layer_to_json(layer));
  }
  return {{"plan_name", plan_name},
          {"per_layer", per_layer},
          {"footprint_entries", footprint_entries},
          {"seen_tokens", cache.seen_tokens}};
}

}  // namespace

std::string prefill_report_to_json(const std::string& plan_name,
                                   const PrunedCache& cache,
                                   const TraceHeader& header) {
  return run_to_json(plan_name, cache, memory_footprint(cache, header)).dump(2) +
         "\n";
}

std::string comparison_report_to_json(const ComparisonReport& report) {
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& run : report.plans) {
    nlohmann::json j = run_to_json(run.plan_name, run.cache, run.footprint_entries);
    nlohmann::json& per_layer = j["per_layer"];
    for (std::size_t l = 0; l < run.jaccard_vs_full.size(); ++l) {
      per_layer[l]["jaccard_vs_full"] = run.jaccard_vs_full[l];
    }
    plans.push_back(std::move(j));
  }
  return nlohmann::json{{"chunk_size", report.chunk_size},
                        {"scorer", scorer_name(report.scorer)},
                        {"plans", plans}}
             .dump(2) +
         "\n";
}

}  // namespace depthkv
