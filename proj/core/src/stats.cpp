#include "depthkv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>
#include <nlohmann/json.hpp>

#include "depthkv/rng.hpp"

namespace depthkv {

namespace {

// Population variance (divide by L) of the per-layer means of one table row
// arrangement.
double layer_mean_variance(const std::vector<double>& cells,
                           std::size_t samples, std::size_t layers) {
  double grand = 0.0;
  std::vector<double> means(layers, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t l = 0; l < layers; ++l) {
      means[l] += cells[s * layers + l];
    }
  }
  for (double& m : means) {
    m /= static_cast<double>(samples);
    grand += m;
  }
  grand /= static_cast<double>(layers);
  double var = 0.0;
  for (double m : means) {
    const double d = m - grand;
    var += d * d;
  }
  return var / static_cast<double>(layers);
}

// Two-sided Student-t tail probability for nu degrees of freedom via the
// regularized incomplete beta function, P = I_{nu/(nu+t^2)}(nu/2, 1/2).
double student_t_two_sided(double t, double nu) {
  const double x = nu / (nu + t * t);
  return boost::math::ibeta(nu / 2.0, 0.5, x);
}

}  // namespace

PermutationResult permutation_test(const ScoreTable& table, std::uint32_t n_perm,
                                   std::uint64_t seed,
                                   PermutationScheme scheme) {
  table.validate();
  if (table.num_layers < 2) {
    throw std::invalid_argument("permutation test needs at least two layers");
  }
  if (n_perm == 0) {
    throw std::invalid_argument("permutation test needs n_perm >= 1");
  }

  const std::size_t samples = table.num_samples;
  const std::size_t layers = table.num_layers;
  const double observed = layer_mean_variance(table.values, samples, layers);

  const CounterRng root(seed);
  std::uint64_t exceed = 0;
  double null_sum = 0.0;
  double null_sum_sq = 0.0;
  std::vector<double> cells(table.values);
  for (std::uint32_t r = 0; r < n_perm; ++r) {
    const CounterRng stream = root.derive(r);
    cells = table.values;
    if (scheme == PermutationScheme::row_wise) {
      // shuffle each sample's layer labels; row s uses draw slots [s*L, ...)
      for (std::size_t s = 0; s < samples; ++s) {
        counter_shuffle(cells.begin() + static_cast<std::ptrdiff_t>(s * layers),
                        cells.begin() + static_cast<std::ptrdiff_t>((s + 1) * layers),
                        stream, s * layers);
      }
    } else {
      counter_shuffle(cells.begin(), cells.end(), stream, 0);
    }
    const double stat = layer_mean_variance(cells, samples, layers);
    if (stat >= observed) {
      ++exceed;
    }
    null_sum += stat;
    null_sum_sq += stat * stat;
  }

  PermutationResult result;
  result.observed = observed;
  result.n_perm = n_perm;
  result.seed = seed;
  result.p_value = (static_cast<double>(exceed) + 1.0) /
                   (static_cast<double>(n_perm) + 1.0);
  const double null_mean = null_sum / static_cast<double>(n_perm);
  const double null_var =
      std::max(0.0, null_sum_sq / static_cast<double>(n_perm) - null_mean * null_mean);
  const double null_std = std::sqrt(null_var);
  result.effect_size = null_std > 0.0 ? (observed - null_mean) / null_std : 0.0;
  return result;
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) {
    throw std::invalid_argument("correlation inputs must have equal length");
  }
  if (n < 3) {
    throw std::invalid_argument("correlation needs at least three points");
  }

  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("correlation input has zero variance");
  }

  double r = sxy / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0, 1.0);

  CorrelationResult result;
  result.coefficient = r;
  result.n = n;
  const double one_minus_r2 = 1.0 - r * r;
  if (one_minus_r2 <= 0.0) {
    result.p_value = kMinTailP;
  } else {
    const double nu = static_cast<double>(n - 2);
    const double t = r * std::sqrt(nu / one_minus_r2);
    result.p_value = std::max(student_t_two_sided(t, nu), kMinTailP);
  }
  return result;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    // positions i..j (0-based) share the mean 1-based rank
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) {
      ranks[order[m]] = mean_rank;
    }
    i = j + 1;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("correlation inputs must have equal length");
  }
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

std::int64_t yapscore(std::int64_t length, std::int64_t baseline) {
  return std::max<std::int64_t>(0, length - baseline);
}

std::vector<double> zscore(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) {
    throw std::invalid_argument("zscore needs at least two values");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) {
    const double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  if (var == 0.0) {
    throw std::invalid_argument("zscore input has zero standard deviation");
  }
  const double inv_std = 1.0 / std::sqrt(var);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (values[i] - mean) * inv_std;
  }
  return out;
}

std::string permutation_result_to_json(const PermutationResult& result) {
  return nlohmann::json{{"observed", result.observed},
                        {"p_value", result.p_value},
                        {"effect_size", result.effect_size},
                        {"n_perm", result.n_perm},
                        {"seed", result.seed}}
             .dump(2) +
         "\n";
}

std::string correlation_result_to_json(const CorrelationResult& result) {
  return nlohmann::json{{"coefficient", result.coefficient},
                        {"p_value", result.p_value},
                        {"n", result.n}}
             .dump(2) +
         "\n";
}

}  // namespace depthkv
