#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "depthkv/allocation.hpp"
#include "depthkv/importance.hpp"
#include "depthkv/prefill_sim.hpp"
#include "depthkv/trace.hpp"

using namespace depthkv;

namespace {

// Reference simulator written from the chunked-eviction description with
// map/set bookkeeping; records the retained set after every chunk.
struct ReferenceResult {
  std::vector<std::vector<std::uint32_t>> per_chunk_retained;
  std::vector<std::uint32_t> final_retained;
};

ReferenceResult reference_layer_sim(const AttentionTrace& t, std::uint32_t layer,
                                    std::uint32_t budget, std::uint32_t chunk,
                                    ScorerKind scorer) {
  const std::uint32_t n = t.seq_len();
  const std::uint32_t heads = t.num_heads();
  std::map<std::uint32_t, double> acc;  // alive token -> accumulated attention

  std::vector<double> weight(n, 1.0);
  if (scorer != ScorerKind::h2o) {
    for (std::uint32_t tok = 0; tok < n; ++tok) {
      std::vector<double> mean(t.value_dim(), 0.0);
      for (std::uint32_t h = 0; h < heads; ++h) {
        const auto row = t.v_row(layer, h, tok);
        for (std::uint32_t d = 0; d < t.value_dim(); ++d) {
          mean[d] += static_cast<double>(row[d]) / heads;
        }
      }
      double norm = 0.0;
      for (double x : mean) {
        norm += scorer == ScorerKind::value_aware_l1 ? std::abs(x) : x * x;
      }
      weight[tok] = scorer == ScorerKind::value_aware_l1 ? norm : std::sqrt(norm);
    }
  }

  ReferenceResult result;
  for (std::uint32_t start = 0; start < n; start += chunk) {
    const std::uint32_t end = std::min(n, start + chunk);
    for (std::uint32_t i = start; i < end; ++i) {
      acc[i] = 0.0;
    }
    for (std::uint32_t h = 0; h < heads; ++h) {
      for (std::uint32_t i = start; i < end; ++i) {
        std::vector<std::uint32_t> visible;
        for (const auto& [tok, unused] : acc) {
          if (tok <= i) visible.push_back(tok);
        }
        std::vector<double> logits(visible.size());
        const auto q = t.q_row(layer, h, i);
        for (std::size_t j = 0; j < visible.size(); ++j) {
          double dot = 0.0;
          const auto kj = t.k_row(layer, h, visible[j]);
          for (std::uint32_t d = 0; d < t.key_dim(); ++d) {
            dot += static_cast<double>(q[d]) * static_cast<double>(kj[d]);
          }
          logits[j] = dot / std::sqrt(static_cast<double>(t.key_dim()));
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double& v : logits) {
          v = std::exp(v - m);
          denom += v;
        }
        for (std::size_t j = 0; j < visible.size(); ++j) {
          if (visible[j] != i) {
            acc[visible[j]] += logits[j] / denom / heads;
          }
        }
      }
    }
    if (acc.size() > budget) {
      std::vector<std::pair<std::uint32_t, double>> scored(acc.begin(), acc.end());
      std::stable_sort(scored.begin(), scored.end(),
                       [&](const auto& a, const auto& b) {
                         const double ka = weight[a.first] * a.second;
                         const double kb = weight[b.first] * b.second;
                         if (ka != kb) return ka > kb;
                         return a.first < b.first;
                       });
      scored.resize(budget);
      std::map<std::uint32_t, double> kept;
      for (const auto& [tok, s] : scored) kept[tok] = s;
      acc = std::move(kept);
    }
    std::vector<std::uint32_t> snapshot;
    for (const auto& [tok, unused] : acc) snapshot.push_back(tok);
    result.per_chunk_retained.push_back(snapshot);
  }
  result.final_retained = result.per_chunk_retained.back();
  return result;
}

PrefillConfig config_for(const LayerBudgetPlan& plan, std::uint32_t chunk,
                         ScorerKind scorer = ScorerKind::h2o) {
  PrefillConfig config;
  config.chunk_size = chunk;
  config.scorer = scorer;
  config.plan = plan;
  return config;
}

LayerBudgetPlan manual_plan(std::vector<double> ratios) {
  LayerBudgetPlan plan;
  plan.strategy = "manual";
  plan.num_layers = static_cast<std::uint32_t>(ratios.size());
  double sum = 0.0;
  for (double r : ratios) sum += r;
  plan.global_ratio = sum / static_cast<double>(ratios.size());
  plan.ratios = std::move(ratios);
  return plan;
}

}  // namespace

TEST_CASE("a budget covering the whole sequence retains every token") {
  const auto t = generate_synthetic_trace(2, 2, 12, 4, 4, 3);
  const auto cache = run_chunked_prefill(t, config_for(manual_plan({0.0, 0.0}), 4));
  for (const auto& layer : cache.layers) {
    REQUIRE(layer.retained.size() == 12);
    for (std::uint32_t i = 0; i < 12; ++i) {
      CHECK(layer.retained[i] == i);
    }
  }
  CHECK(memory_footprint(cache, t.header()) == 2ULL * 12 * 2 * (4 + 4));
}

TEST_CASE("single-chunk prefill reduces to full-sequence top-k") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::uint32_t n = 8 + static_cast<std::uint32_t>(seed) * 3;
    const auto t = generate_synthetic_trace(2, 2, n, 4, 3, 500 + seed);
    const auto plan = manual_plan({0.4, 0.6});
    for (const ScorerKind scorer : {ScorerKind::h2o, ScorerKind::value_aware_l1,
                                    ScorerKind::value_aware_l2}) {
      const auto cache = run_chunked_prefill(t, config_for(plan, n + 5, scorer));
      const auto counts = ratios_to_counts(plan, n);
      for (std::uint32_t l = 0; l < 2; ++l) {
        ImportanceScores scores;
        switch (scorer) {
          case ScorerKind::h2o:
            scores = h2o_importance(t, l);
            break;
          case ScorerKind::value_aware_l1:
            scores = value_aware_importance(t, l, ValueNorm::l1);
            break;
          case ScorerKind::value_aware_l2:
            scores = value_aware_importance(t, l, ValueNorm::l2);
            break;
        }
        const auto expected = select_top_tokens(scores, counts.counts[l]);
        CHECK(cache.layers[l].retained == expected.indices);
      }
    }
  }
}

TEST_CASE("multi-chunk results match the reference simulator exactly") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::uint32_t n = 16 + static_cast<std::uint32_t>(seed) * 6;  // up to 58
    const std::uint32_t chunk = 4 + static_cast<std::uint32_t>(seed % 3) * 3;
    const auto t = generate_synthetic_trace(2, 2, n, 4, 3, 900 + seed);
    const auto plan = manual_plan({0.5, 0.25});
    const auto counts = ratios_to_counts(plan, n);
    const ScorerKind scorer =
        seed % 2 ? ScorerKind::value_aware_l1 : ScorerKind::h2o;

    const auto cache = run_chunked_prefill(t, config_for(plan, chunk, scorer));
    for (std::uint32_t l = 0; l < 2; ++l) {
      const auto ref = reference_layer_sim(t, l, counts.counts[l], chunk, scorer);
      CHECK(cache.layers[l].retained == ref.final_retained);
      CHECK(cache.layers[l].retained.size() ==
            std::min<std::size_t>(counts.counts[l], n));

      // irreversibility along the chunk chain
      for (std::size_t c = 1; c < ref.per_chunk_retained.size(); ++c) {
        std::set<std::uint32_t> allowed(ref.per_chunk_retained[c - 1].begin(),
                                        ref.per_chunk_retained[c - 1].end());
        const std::uint32_t chunk_start = static_cast<std::uint32_t>(c) * chunk;
        for (std::uint32_t tok = chunk_start;
             tok < std::min(n, chunk_start + chunk); ++tok) {
          allowed.insert(tok);
        }
        for (std::uint32_t tok : ref.per_chunk_retained[c]) {
          CHECK(allowed.contains(tok));
        }
      }
    }
  }
}

TEST_CASE("the worked 8-token example evicts to the top four") {
  const auto t = generate_synthetic_trace(1, 1, 8, 4, 4, 42);
  const auto plan = manual_plan({0.5});
  const auto cache = run_chunked_prefill(t, config_for(plan, 4));
  const auto ref = reference_layer_sim(t, 0, 4, 4, ScorerKind::h2o);
  REQUIRE(ref.per_chunk_retained.size() == 2);
  // first chunk fills the budget exactly, no eviction yet
  CHECK(ref.per_chunk_retained[0] == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK(cache.layers[0].retained == ref.final_retained);
  CHECK(cache.layers[0].retained.size() == 4);
}

TEST_CASE("memory footprint counts stored scalars") {
  PrunedCache cache;
  cache.seen_tokens = 10;
  cache.layers.resize(2);
  cache.layers[0].retained = {0, 2, 4, 6};
  cache.layers[1].retained = {1, 3};
  TraceHeader header{2, 1, 10, 3, 3};
  CHECK(memory_footprint(cache, header) == (4 + 2) * 1 * 6);

  cache.layers[0].retained.clear();
  cache.layers[1].retained.clear();
  CHECK(memory_footprint(cache, header) == 0);
}

TEST_CASE("full-context replay equals renormalized mode on a single chunk") {
  const auto t = generate_synthetic_trace(2, 1, 10, 3, 3, 8);
  const auto plan = manual_plan({0.3, 0.5});
  auto renorm = config_for(plan, 10);
  auto replay = config_for(plan, 10);
  replay.replay = AttentionReplay::full_context;
  const auto a = run_chunked_prefill(t, renorm);
  const auto b = run_chunked_prefill(t, replay);
  for (std::uint32_t l = 0; l < 2; ++l) {
    CHECK(a.layers[l].retained == b.layers[l].retained);
  }
}

TEST_CASE("full-context replay runs across chunks") {
  const auto t = generate_synthetic_trace(1, 2, 24, 4, 4, 12);
  auto config = config_for(manual_plan({0.5}), 6);
  config.replay = AttentionReplay::full_context;
  const auto cache = run_chunked_prefill(t, config);
  CHECK(cache.layers[0].retained.size() == 12);
}

TEST_CASE("prefill validates its inputs") {
  const auto t = generate_synthetic_trace(2, 1, 8, 2, 2, 1);
  CHECK_THROWS_AS(run_chunked_prefill(t, config_for(manual_plan({0.5}), 4)),
                  std::invalid_argument);
  auto config = config_for(manual_plan({0.5, 0.5}), 4);
  config.chunk_size = 0;
  CHECK_THROWS_AS(run_chunked_prefill(t, config), std::invalid_argument);
}

TEST_CASE("compare_plans reports identical totals for equal global ratios") {
  const auto t = generate_synthetic_trace(4, 2, 32, 4, 4, 55);
  std::vector<double> metric = {0.1, 0.9, 0.4, 0.2};
  const auto uniform = uniform_plan(4, 0.5);
  const auto mga = mga_plan(4, 0.5, metric);
  const auto report =
      compare_plans(t, {uniform, mga, uniform}, 8, ScorerKind::h2o,
                    AttentionReplay::visible_renormalized);

  REQUIRE(report.plans.size() == 3);
  CHECK(report.plans[0].footprint_entries == report.plans[1].footprint_entries);
  for (std::uint32_t l = 0; l < 4; ++l) {
    // identical plans give identical retained sets
    CHECK(report.plans[0].cache.layers[l].retained ==
          report.plans[2].cache.layers[l].retained);
    // per-layer counts equal the plans' counts
    CHECK(report.plans[0].cache.layers[l].retained.size() ==
          report.plans[0].counts.counts[l]);
    CHECK(report.plans[0].jaccard_vs_full[l] >= 0.0);
    CHECK(report.plans[0].jaccard_vs_full[l] <= 1.0);
  }

  SUBCASE("single-chunk comparison overlaps fully with the reference top-k") {
    const auto one = compare_plans(t, {uniform}, 64, ScorerKind::h2o,
                                   AttentionReplay::visible_renormalized);
    for (double j : one.plans[0].jaccard_vs_full) {
      CHECK(j == 1.0);
    }
  }

  SUBCASE("mismatched plan shapes are rejected") {
    const auto other = uniform_plan(3, 0.5);
    CHECK_THROWS_AS(compare_plans(t, {uniform, other}, 8, ScorerKind::h2o,
                                  AttentionReplay::visible_renormalized),
                    std::invalid_argument);
    const auto different_rho = uniform_plan(4, 0.25);
    CHECK_THROWS_AS(compare_plans(t, {uniform, different_rho}, 8, ScorerKind::h2o,
                                  AttentionReplay::visible_renormalized),
                    std::invalid_argument);
  }
}

TEST_CASE("prefill reports serialize with the documented keys") {
  const auto t = generate_synthetic_trace(1, 1, 6, 2, 2, 2);
  const auto cache = run_chunked_prefill(t, config_for(manual_plan({0.5}), 3));
  const auto text = prefill_report_to_json("uniform", cache, t.header());
  for (const char* key : {"plan_name", "per_layer", "footprint_entries",
                          "seen_tokens", "score_summary", "retained", "budget"}) {
    CHECK(text.find(key) != std::string::npos);
  }
}
