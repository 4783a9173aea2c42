#include "depthkv/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "attention_kernels.hpp"
#include "text_io.hpp"

namespace depthkv {

namespace {

void check_layer_head(const AttentionTrace& trace, std::uint32_t layer,
                      std::uint32_t head) {
  if (layer >= trace.num_layers()) {
    throw std::out_of_range("layer index " + std::to_string(layer) +
                            " out of range (L=" +
                            std::to_string(trace.num_layers()) + ")");
  }
  if (head >= trace.num_heads()) {
    throw std::out_of_range("head index " + std::to_string(head) +
                            " out of range (H=" +
                            std::to_string(trace.num_heads()) + ")");
  }
}

// Accumulates, for one layer, sum_{i > j} alpha[i][j] / H into `sums`.
void accumulate_head_attention(const AttentionTrace& trace, std::uint32_t layer,
                               std::vector<double>& sums) {
  const std::uint32_t n = trace.seq_len();
  const std::uint32_t heads = trace.num_heads();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(trace.key_dim()));
  const double inv_heads = 1.0 / static_cast<double>(heads);

  std::vector<double> row(n);
  for (std::uint32_t h = 0; h < heads; ++h) {
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto q = trace.q_row(layer, h, i);
      for (std::uint32_t j = 0; j <= i; ++j) {
        row[j] = detail::dot_f(q, trace.k_row(layer, h, j)) * inv_scale;
      }
      detail::softmax_inplace({row.data(), i + 1});
      for (std::uint32_t j = 0; j < i; ++j) {
        sums[j] += row[j] * inv_heads;
      }
    }
  }
}

}  // namespace

CausalMatrix attention_scores(const AttentionTrace& trace, std::uint32_t layer,
                              std::uint32_t head) {
  check_layer_head(trace, layer, head);
  const std::uint32_t n = trace.seq_len();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(trace.key_dim()));

  CausalMatrix scores(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto q = trace.q_row(layer, head, i);
    for (std::uint32_t j = 0; j <= i; ++j) {
      scores.at(i, j) = detail::dot_f(q, trace.k_row(layer, head, j)) * inv_scale;
    }
  }
  return scores;
}

CausalMatrix normalize_attention(const CausalMatrix& scores) {
  const std::size_t n = scores.size();
  CausalMatrix weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = scores.row_prefix(i);
    const auto dst = weights.row_prefix(i);
    std::copy(src.begin(), src.end(), dst.begin());
    detail::softmax_inplace(dst);
  }
  return weights;
}

std::vector<double> cumulative_attention(const CausalMatrix& weights) {
  const std::size_t n = weights.size();
  std::vector<double> sums(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      sums[j] += weights.at(i, j);
    }
  }
  return sums;
}

ImportanceScores h2o_importance(const AttentionTrace& trace, std::uint32_t layer) {
  check_layer_head(trace, layer, 0);
  ImportanceScores result;
  result.layer = layer;
  result.scores.assign(trace.seq_len(), 0.0);
  accumulate_head_attention(trace, layer, result.scores);
  return result;
}

std::vector<double> value_magnitudes(const AttentionTrace& trace,
                                     std::uint32_t layer, ValueNorm norm,
                                     ValueAggregation aggregation) {
  const std::uint32_t n = trace.seq_len();
  const std::uint32_t heads = trace.num_heads();
  const std::uint32_t dim = trace.value_dim();
  const double inv_heads = 1.0 / static_cast<double>(heads);

  auto vector_norm = [norm](std::span<const double> v) {
    double acc = 0.0;
    if (norm == ValueNorm::l1) {
      for (double x : v) acc += std::abs(x);
      return acc;
    }
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
  };

  std::vector<double> magnitudes(n, 0.0);
  std::vector<double> mean_row(dim);
  for (std::uint32_t t = 0; t < n; ++t) {
    if (aggregation == ValueAggregation::head_mean_vector) {
      std::fill(mean_row.begin(), mean_row.end(), 0.0);
      for (std::uint32_t h = 0; h < heads; ++h) {
        const auto row = trace.v_row(layer, h, t);
        for (std::uint32_t d = 0; d < dim; ++d) {
          mean_row[d] += static_cast<double>(row[d]) * inv_heads;
        }
      }
      magnitudes[t] = vector_norm(mean_row);
    } else {
      double acc = 0.0;
      for (std::uint32_t h = 0; h < heads; ++h) {
        const auto row = trace.v_row(layer, h, t);
        std::copy(row.begin(), row.end(), mean_row.begin());
        acc += vector_norm({mean_row.data(), dim});
      }
      magnitudes[t] = acc * inv_heads;
    }
  }
  return magnitudes;
}

ImportanceScores value_aware_importance(const AttentionTrace& trace,
                                        std::uint32_t layer, ValueNorm norm,
                                        ValueAggregation aggregation) {
  ImportanceScores result = h2o_importance(trace, layer);
  const std::vector<double> magnitudes =
      value_magnitudes(trace, layer, norm, aggregation);
  for (std::size_t t = 0; t < result.scores.size(); ++t) {
    result.scores[t] *= magnitudes[t];
  }
  return result;
}

RetainedSet select_top_tokens(const ImportanceScores& scores,
                              std::uint32_t budget) {
  const std::size_t n = scores.scores.size();
  if (budget > n) {
    throw std::invalid_argument("budget " + std::to_string(budget) +
                                " exceeds token count " + std::to_string(n));
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + budget, order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (scores.scores[a] != scores.scores[b]) {
                        return scores.scores[a] > scores.scores[b];
                      }
                      return a < b;
                    });
  order.resize(budget);
  std::sort(order.begin(), order.end());

  return RetainedSet{scores.layer, budget, std::move(order)};
}

std::string scores_to_csv(const ImportanceScores& scores) {
  std::string out = "token_index,score\n";
  for (std::size_t t = 0; t < scores.scores.size(); ++t) {
    out += std::to_string(t);
    out += ',';
    out += detail::format_double(scores.scores[t]);
    out += '\n';
  }
  return out;
}

std::string retained_to_json(const RetainedSet& retained) {
  std::string out = "{\"layer\":" + std::to_string(retained.layer) +
                    ",\"budget\":" + std::to_string(retained.budget) +
                    ",\"indices\":[";
  for (std::size_t i = 0; i < retained.indices.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(retained.indices[i]);
  }
  out += "]}";
  return out;
}

}  // namespace depthkv
