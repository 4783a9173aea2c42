#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "depthkv/trace.hpp"

namespace depthkv {

// Square matrix holding causal attention entries: row i is defined for
// columns j <= i only; the strict upper triangle is masked and must never be
// read.
class CausalMatrix {
 public:
  explicit CausalMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  std::size_t size() const { return n_; }

  double at(std::size_t i, std::size_t j) const {
    assert(j <= i && i < n_);
    return data_[i * n_ + j];
  }
  double& at(std::size_t i, std::size_t j) {
    assert(j <= i && i < n_);
    return data_[i * n_ + j];
  }

  // Entries j = 0..i of row i.
  std::span<const double> row_prefix(std::size_t i) const {
    assert(i < n_);
    return {data_.data() + i * n_, i + 1};
  }
  std::span<double> row_prefix(std::size_t i) {
    assert(i < n_);
    return {data_.data() + i * n_, i + 1};
  }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

struct ImportanceScores {
  std::uint32_t layer = 0;
  std::vector<double> scores;  // one per token, non-negative
};

struct RetainedSet {
  std::uint32_t layer = 0;
  std::uint32_t budget = 0;
  std::vector<std::uint32_t> indices;  // strictly ascending, size == budget
};

enum class ValueNorm { l1 = 1, l2 = 2 };

// How the per-token value magnitude is reduced across heads.
enum class ValueAggregation {
  head_mean_vector,    // norm of the head-mean value vector (default)
  mean_of_head_norms,  // mean of per-head value norms
};

// Scaled dot-product scores a[i][j] = <Q_i, K_j> / sqrt(d_k) for j <= i.
CausalMatrix attention_scores(const AttentionTrace& trace, std::uint32_t layer,
                              std::uint32_t head);

// Row softmax over the causal prefix, stabilized by subtracting the row max.
// Each row sums to 1 over j <= i.
CausalMatrix normalize_attention(const CausalMatrix& scores);

// s_j = sum_{i > j} weights[i][j]; the last token's score is 0 (empty sum).
std::vector<double> cumulative_attention(const CausalMatrix& weights);

// Attention-only importance: per head, softmax the scaled dot-product scores,
// average the weights across heads, then accumulate each column below the
// diagonal.
ImportanceScores h2o_importance(const AttentionTrace& trace, std::uint32_t layer);

// Value-aware importance: the h2o accumulation weighted per token by the
// magnitude of its value vector.
ImportanceScores value_aware_importance(
    const AttentionTrace& trace, std::uint32_t layer,
    ValueNorm norm = ValueNorm::l1,
    ValueAggregation aggregation = ValueAggregation::head_mean_vector);

// Per-token value magnitudes used by value_aware_importance.
std::vector<double> value_magnitudes(const AttentionTrace& trace,
                                     std::uint32_t layer, ValueNorm norm,
                                     ValueAggregation aggregation);

// The `budget` highest-scoring token indices, ties broken toward the lower
// index, returned in ascending order. Throws std::invalid_argument when
// budget exceeds the token count.
RetainedSet select_top_tokens(const ImportanceScores& scores, std::uint32_t budget);

// CSV with header "token_index,score".
std::string scores_to_csv(const ImportanceScores& scores);

// JSON object {"layer": l, "budget": B, "indices": [...]}.
std::string retained_to_json(const RetainedSet& retained);

}  // namespace depthkv
