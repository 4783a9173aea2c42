#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "depthkv/importance.hpp"
#include "depthkv/trace.hpp"

using namespace depthkv;

namespace {

AttentionTrace make_trace(std::uint32_t layers, std::uint32_t heads,
                          std::uint32_t n, std::uint32_t d_k, std::uint32_t d_v,
                          std::vector<float> q, std::vector<float> k,
                          std::vector<float> v) {
  return AttentionTrace(TraceHeader{layers, heads, n, d_k, d_v}, std::move(q),
                        std::move(k), std::move(v));
}

// Naive O(N^2 * H) recomputation straight from the definitions, written
// without the library's shared kernels.
std::vector<double> oracle_h2o(const AttentionTrace& t, std::uint32_t layer) {
  const std::uint32_t n = t.seq_len();
  const std::uint32_t heads = t.num_heads();
  std::vector<std::vector<double>> abar(n, std::vector<double>(n, 0.0));
  for (std::uint32_t h = 0; h < heads; ++h) {
    for (std::uint32_t i = 0; i < n; ++i) {
      std::vector<double> row(i + 1);
      double best = -1e300;
      for (std::uint32_t j = 0; j <= i; ++j) {
        double dot = 0.0;
        const auto qi = t.q_row(layer, h, i);
        const auto kj = t.k_row(layer, h, j);
        for (std::uint32_t d = 0; d < t.key_dim(); ++d) {
          dot += static_cast<double>(qi[d]) * static_cast<double>(kj[d]);
        }
        row[j] = dot / std::sqrt(static_cast<double>(t.key_dim()));
        best = std::max(best, row[j]);
      }
      double denom = 0.0;
      for (std::uint32_t j = 0; j <= i; ++j) denom += std::exp(row[j] - best);
      for (std::uint32_t j = 0; j <= i; ++j) {
        abar[i][j] += std::exp(row[j] - best) / denom / heads;
      }
    }
  }
  std::vector<double> scores(n, 0.0);
  for (std::uint32_t j = 0; j < n; ++j) {
    for (std::uint32_t i = j + 1; i < n; ++i) {
      scores[j] += abar[i][j];
    }
  }
  return scores;
}

std::vector<double> oracle_value_aware(const AttentionTrace& t,
                                       std::uint32_t layer, int p) {
  std::vector<double> scores = oracle_h2o(t, layer);
  const std::uint32_t n = t.seq_len();
  for (std::uint32_t j = 0; j < n; ++j) {
    std::vector<double> mean(t.value_dim(), 0.0);
    for (std::uint32_t h = 0; h < t.num_heads(); ++h) {
      const auto vr = t.v_row(layer, h, j);
      for (std::uint32_t d = 0; d < t.value_dim(); ++d) {
        mean[d] += static_cast<double>(vr[d]) / t.num_heads();
      }
    }
    double norm = 0.0;
    for (double x : mean) {
      norm += (p == 1) ? std::abs(x) : x * x;
    }
    if (p == 2) norm = std::sqrt(norm);
    scores[j] *= norm;
  }
  return scores;
}

}  // namespace

TEST_CASE("attention scores are scaled dot products over the causal prefix") {
  SUBCASE("zero vectors give zero scores") {
    const auto t = make_trace(1, 1, 3, 2, 1, std::vector<float>(6, 0.0f),
                              std::vector<float>(6, 0.0f),
                              std::vector<float>(3, 0.0f));
    const auto a = attention_scores(t, 0, 0);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        CHECK(a.at(i, j) == 0.0);
      }
    }
  }

  SUBCASE("d_k = 1 hand fixture") {
    const auto t = make_trace(1, 1, 2, 1, 1, {2.0f, 4.0f}, {3.0f, 5.0f},
                              {0.0f, 0.0f});
    const auto a = attention_scores(t, 0, 0);
    CHECK(a.at(1, 0) == 12.0);
    CHECK(a.at(0, 0) == 6.0);
    CHECK(a.at(1, 1) == 20.0);
  }

  SUBCASE("all-ones vectors of width 4 score d_k / sqrt(d_k) = 2") {
    const auto t = make_trace(1, 1, 2, 4, 1, std::vector<float>(8, 1.0f),
                              std::vector<float>(8, 1.0f),
                              std::vector<float>(2, 0.0f));
    const auto a = attention_scores(t, 0, 0);
    CHECK(a.at(0, 0) == 2.0);
    CHECK(a.at(1, 0) == 2.0);
    CHECK(a.at(1, 1) == 2.0);
  }

  SUBCASE("indices out of range") {
    const auto t = make_trace(1, 1, 2, 1, 1, {0, 0}, {0, 0}, {0, 0});
    CHECK_THROWS_AS(attention_scores(t, 1, 0), std::out_of_range);
    CHECK_THROWS_AS(attention_scores(t, 0, 1), std::out_of_range);
  }
}

TEST_CASE("normalize_attention is a row softmax over the prefix") {
  CausalMatrix scores(3);
  scores.at(0, 0) = 42.0;
  scores.at(1, 0) = 1.0;
  scores.at(1, 1) = 1.0;
  scores.at(2, 0) = 0.0;
  scores.at(2, 1) = std::log(3.0);
  scores.at(2, 2) = -100.0;
  const auto w = normalize_attention(scores);

  CHECK(w.at(0, 0) == 1.0);
  CHECK(w.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.at(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  // [0, ln 3] plus a negligible third entry: first two weights 0.25 / 0.75
  CHECK(w.at(2, 0) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(w.at(2, 1) == doctest::Approx(0.75).epsilon(1e-9));

  SUBCASE("two-entry row [0, ln 3] softmaxes to [0.25, 0.75]") {
    CausalMatrix two(2);
    two.at(0, 0) = 0.0;
    two.at(1, 0) = 0.0;
    two.at(1, 1) = std::log(3.0);
    const auto wt = normalize_attention(two);
    CHECK(wt.at(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(wt.at(1, 1) == doctest::Approx(0.75).epsilon(1e-12));
  }

  SUBCASE("equal scores split the row evenly") {
    CausalMatrix eq(4);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j <= i; ++j) eq.at(i, j) = 7.5;
    }
    const auto we = normalize_attention(eq);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        CHECK(we.at(i, j) == doctest::Approx(1.0 / (i + 1)).epsilon(1e-12));
      }
    }
  }

  SUBCASE("rows sum to one") {
    const auto t = generate_synthetic_trace(1, 1, 24, 6, 2, 15);
    const auto w2 = normalize_attention(attention_scores(t, 0, 0));
    for (std::size_t i = 0; i < 24; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j <= i; ++j) sum += w2.at(i, j);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("cumulative attention sums columns below the diagonal") {
  CausalMatrix abar(3);
  abar.at(0, 0) = 1.0;
  abar.at(1, 0) = 0.5;
  abar.at(1, 1) = 0.5;
  abar.at(2, 0) = 0.2;
  abar.at(2, 1) = 0.3;
  abar.at(2, 2) = 0.5;
  const auto s = cumulative_attention(abar);
  CHECK(s[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s[2] == 0.0);
}

TEST_CASE("h2o importance handles the single-token and multi-head cases") {
  SUBCASE("N = 1 gives the empty-sum score") {
    const auto t = make_trace(1, 1, 1, 2, 2, {1, 2}, {3, 4}, {5, 6});
    const auto s = h2o_importance(t, 0);
    CHECK(s.scores == std::vector<double>{0.0});
  }

  SUBCASE("two identical heads equal one head") {
    const auto one = generate_synthetic_trace(1, 1, 10, 3, 2, 5);
    std::vector<float> q2, k2, v2;
    // duplicate the single head
    for (int rep = 0; rep < 2; ++rep) {
      q2.insert(q2.end(), one.q_tensor().begin(), one.q_tensor().end());
      k2.insert(k2.end(), one.k_tensor().begin(), one.k_tensor().end());
      v2.insert(v2.end(), one.v_tensor().begin(), one.v_tensor().end());
    }
    const auto two = make_trace(1, 2, 10, 3, 2, q2, k2, v2);
    const auto s1 = h2o_importance(one, 0);
    const auto s2 = h2o_importance(two, 0);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(s2.scores[i] == doctest::Approx(s1.scores[i]).epsilon(1e-12));
    }
  }

  SUBCASE("head order does not matter") {
    const auto t = generate_synthetic_trace(1, 3, 12, 4, 2, 31);
    // swap heads 0 and 2
    std::vector<float> q = t.q_tensor(), k = t.k_tensor(), v = t.v_tensor();
    const std::size_t qk_head = 12 * 4, v_head = 12 * 2;
    for (std::size_t i = 0; i < qk_head; ++i) {
      std::swap(q[i], q[2 * qk_head + i]);
      std::swap(k[i], k[2 * qk_head + i]);
    }
    for (std::size_t i = 0; i < v_head; ++i) {
      std::swap(v[i], v[2 * v_head + i]);
    }
    const auto permuted = make_trace(1, 3, 12, 4, 2, q, k, v);
    const auto s1 = h2o_importance(t, 0);
    const auto s2 = h2o_importance(permuted, 0);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(s2.scores[i] == doctest::Approx(s1.scores[i]).epsilon(1e-12));
    }
  }

  SUBCASE("last token scores exactly zero, all scores non-negative") {
    const auto t = generate_synthetic_trace(2, 2, 16, 4, 4, 77);
    for (std::uint32_t l = 0; l < 2; ++l) {
      const auto s = h2o_importance(t, l);
      CHECK(s.scores.back() == 0.0);
      for (double x : s.scores) CHECK(x >= 0.0);
    }
  }
}

TEST_CASE("value-aware importance weighs by value magnitude") {
  SUBCASE("zero values kill every score") {
    const auto base = generate_synthetic_trace(1, 1, 8, 3, 2, 9);
    const auto t = make_trace(1, 1, 8, 3, 2, base.q_tensor(), base.k_tensor(),
                              std::vector<float>(16, 0.0f));
    const auto s = value_aware_importance(t, 0);
    for (double x : s.scores) CHECK(x == 0.0);
  }

  SUBCASE("equal norms scale h2o scores and keep the ranking") {
    const auto base = generate_synthetic_trace(1, 1, 10, 3, 2, 11);
    // all value rows [c, 0] so every l1 and l2 norm equals c
    const double c = 2.5;
    std::vector<float> v(20, 0.0f);
    for (std::size_t t0 = 0; t0 < 10; ++t0) v[t0 * 2] = static_cast<float>(c);
    const auto t = make_trace(1, 1, 10, 3, 2, base.q_tensor(), base.k_tensor(), v);
    const auto h2o = h2o_importance(t, 0);
    const auto va = value_aware_importance(t, 0, ValueNorm::l2);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(va.scores[i] == doctest::Approx(c * h2o.scores[i]).epsilon(1e-12));
    }
    CHECK(select_top_tokens(va, 4).indices == select_top_tokens(h2o, 4).indices);
  }

  SUBCASE("l2 norm fixture: V_0 = [3,-4] with h2o score 0.5") {
    // two tokens, equal attention logits in row 1, so alpha[1][0] = 0.5
    const auto t = make_trace(1, 1, 2, 1, 2, {1.0f, 1.0f}, {1.0f, 1.0f},
                              {3.0f, -4.0f, 0.0f, 0.0f});
    const auto h2o = h2o_importance(t, 0);
    CHECK(h2o.scores[0] == doctest::Approx(0.5).epsilon(1e-12));
    const auto va2 = value_aware_importance(t, 0, ValueNorm::l2);
    CHECK(va2.scores[0] == doctest::Approx(2.5).epsilon(1e-12));
    const auto va1 = value_aware_importance(t, 0, ValueNorm::l1);
    CHECK(va1.scores[0] == doctest::Approx(3.5).epsilon(1e-12));
  }

  SUBCASE("value aggregation modes differ on sign-cancelling heads") {
    // two heads with opposite values: the head-mean vector vanishes while
    // per-head norms do not
    const auto base = generate_synthetic_trace(1, 2, 6, 2, 2, 3);
    std::vector<float> v(2 * 6 * 2);
    for (std::size_t i = 0; i < 12; ++i) {
      v[i] = 1.0f;       // head 0
      v[12 + i] = -1.0f;  // head 1
    }
    const auto t = make_trace(1, 2, 6, 2, 2, base.q_tensor(), base.k_tensor(), v);
    const auto mean_vec = value_magnitudes(t, 0, ValueNorm::l1,
                                           ValueAggregation::head_mean_vector);
    const auto mean_norms = value_magnitudes(t, 0, ValueNorm::l1,
                                             ValueAggregation::mean_of_head_norms);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(mean_vec[j] == 0.0);
      CHECK(mean_norms[j] == doctest::Approx(2.0).epsilon(1e-12));
    }
  }

  SUBCASE("positive scaling of all values leaves the top-k unchanged") {
    const auto t = generate_synthetic_trace(1, 2, 20, 4, 3, 123);
    const auto s = value_aware_importance(t, 0);
    const auto baseline = select_top_tokens(s, 8).indices;
    for (double c : {0.1, 10.0}) {
      std::vector<float> v = t.v_tensor();
      for (float& x : v) x = static_cast<float>(x * c);
      const auto scaled = make_trace(1, 2, 20, 4, 3, t.q_tensor(), t.k_tensor(), v);
      const auto s2 = value_aware_importance(scaled, 0);
      CHECK(select_top_tokens(s2, 8).indices == baseline);
    }
  }
}

TEST_CASE("importance matches the naive oracle on random traces") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::uint32_t layers = 1 + seed % 3;
    const std::uint32_t heads = 1 + seed % 4;
    const std::uint32_t n = 8 + 7 * (seed % 5);
    const auto t = generate_synthetic_trace(layers, heads, n, 4, 3, 1000 + seed);
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto got = h2o_importance(t, l);
      const auto want = oracle_h2o(t, l);
      for (std::uint32_t j = 0; j < n; ++j) {
        CHECK(got.scores[j] == doctest::Approx(want[j]).epsilon(1e-6));
      }
      const auto got_va = value_aware_importance(t, l, ValueNorm::l2);
      const auto want_va = oracle_value_aware(t, l, 2);
      for (std::uint32_t j = 0; j < n; ++j) {
        CHECK(got_va.scores[j] == doctest::Approx(want_va[j]).epsilon(1e-6));
      }
      const std::uint32_t budget = n / 2;
      ImportanceScores oracle_scores{l, want};
      CHECK(select_top_tokens(got, budget).indices ==
            select_top_tokens(oracle_scores, budget).indices);
    }
  }
}

TEST_CASE("select_top_tokens orders by score then index") {
  const ImportanceScores fixture{0, {0.7, 0.3, 0.0}};
  CHECK(select_top_tokens(fixture, 2).indices ==
        std::vector<std::uint32_t>{0, 1});
  CHECK(select_top_tokens(fixture, 3).indices ==
        std::vector<std::uint32_t>{0, 1, 2});
  CHECK(select_top_tokens(fixture, 0).indices.empty());

  const ImportanceScores ties{0, {0.5, 0.5, 0.5}};
  CHECK(select_top_tokens(ties, 2).indices == std::vector<std::uint32_t>{0, 1});

  CHECK_THROWS_AS(select_top_tokens(fixture, 4), std::invalid_argument);
}

TEST_CASE("score export formats") {
  const ImportanceScores s{1, {0.5, 0.25}};
  CHECK(scores_to_csv(s) == "token_index,score\n0,0.5\n1,0.25\n");
  const auto set = select_top_tokens(s, 1);
  CHECK(retained_to_json(set) == "{\"layer\":1,\"budget\":1,\"indices\":[0]}");
}
