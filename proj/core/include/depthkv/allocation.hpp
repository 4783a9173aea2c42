#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace depthkv {

inline constexpr double kDefaultGlobalRatio = 0.6;
inline constexpr double kDefaultRhoMax = 0.7;

// Per-layer pruning ratios under a fixed global ratio: mean(ratios) equals
// global_ratio, protected layers stay at 0.
struct LayerBudgetPlan {
  std::string strategy;
  std::uint32_t num_layers = 0;
  double global_ratio = 0.0;
  double rho_max = kDefaultRhoMax;
  std::vector<double> ratios;                   // size num_layers, in [0, 1]
  std::vector<std::uint32_t> protected_layers;  // ascending

  double mean_ratio() const;
};

// Integer per-layer retained-token counts. counts sums to total exactly and
// every entry is at least 1.
struct LayerCounts {
  std::vector<std::uint32_t> counts;
  std::uint64_t total = 0;
};

// Every layer prunes at the global ratio. With exempt_first_layer, layer 0 is
// protected and the remaining layers absorb its share.
LayerBudgetPlan uniform_plan(std::uint32_t num_layers, double global_ratio,
                             bool exempt_first_layer = false);

// Middle-layer protection: layers 0, floor(L/2) and floor(L/2)+1 are kept
// intact; the rest prune uniformly at L*rho / |pruned|.
LayerBudgetPlan mlp_plan(std::uint32_t num_layers, double global_ratio);

// Metric-guided allocation over layers 1..L-1. Scores are the metric shifted
// to be positive (s = metric - min + 1e-9), ratios are proportional to the
// normalized scores, capped at rho_max with the excess redistributed among
// unsaturated layers until the total L*rho is placed.
LayerBudgetPlan mga_plan(std::uint32_t num_layers, double global_ratio,
                         std::span<const double> metric,
                         double rho_max = kDefaultRhoMax);

// Middle-layer metric allocation: protect layer 0 plus `middle_layers`
// (2, 4 or 6) layers centered on the midpoint, then run the metric-guided
// allocation over the remaining layers.
LayerBudgetPlan mlma_plan(std::uint32_t num_layers, double global_ratio,
                          std::span<const double> metric,
                          std::uint32_t middle_layers,
                          double rho_max = kDefaultRhoMax);

// The protected middle-layer index set used by mlma_plan.
std::vector<std::uint32_t> middle_layer_indices(std::uint32_t num_layers,
                                                std::uint32_t middle_layers);

// Integer budgets B_l from real targets (1 - rho_l) * N by largest-remainder
// rounding (remainder ties to the lower index), with the total pinned to
// round(sum of targets) and a minimum of one retained token per layer.
LayerCounts ratios_to_counts(const LayerBudgetPlan& plan, std::uint32_t seq_len);

// {"strategy", "L", "rho", "rho_max", "ratios", "protected", "counts"}.
// counts is empty unless `counts` is supplied.
std::string plan_to_json(const LayerBudgetPlan& plan,
                         const LayerCounts* counts = nullptr);
LayerBudgetPlan plan_from_json(const std::string& text);

}  // namespace depthkv
