#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "depthkv/score_table.hpp"

namespace depthkv {

inline constexpr std::uint32_t kDefaultPermutations = 10000;

// Two-sided p-value reported for a perfect correlation, where the t-transform
// degenerates: the smallest positive normalized double.
inline constexpr double kMinTailP = std::numeric_limits<double>::min();

// How layer labels are permuted under the null. `row_wise` shuffles each
// sample's values independently, preserving per-sample multisets; `global`
// shuffles all cells of the table at once.
enum class PermutationScheme { row_wise, global };

struct PermutationResult {
  double observed = 0.0;     // variance (population form) of layer means
  double p_value = 1.0;      // (b + 1) / (n_perm + 1)
  double effect_size = 0.0;  // (observed - null mean) / null std, 0 if std = 0
  std::uint32_t n_perm = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo permutation test of uniform layer importance. Requires at
// least 2 layers and 1 sample.
PermutationResult permutation_test(
    const ScoreTable& table, std::uint32_t n_perm = kDefaultPermutations,
    std::uint64_t seed = 0,
    PermutationScheme scheme = PermutationScheme::row_wise);

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Product-moment correlation with a two-sided p-value from the t-transform
// t = r * sqrt((n-2) / (1-r^2)) and the Student-t tail. Requires n >= 3 and
// nonzero variance in both inputs; |r| = 1 reports p = kMinTailP.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// Pearson on average ranks (ties get the mean of their positions).
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

// Average-rank transform, 1-based: ties share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> values);

// max(0, length - baseline).
std::int64_t yapscore(std::int64_t length, std::int64_t baseline);

// (v - mean) / std with the population standard deviation. Requires >= 2
// values and nonzero std.
std::vector<double> zscore(std::span<const double> values);

// {"observed", "p_value", "effect_size", "n_perm", "seed"}.
std::string permutation_result_to_json(const PermutationResult& result);
std::string correlation_result_to_json(const CorrelationResult& result);

}  // namespace depthkv
