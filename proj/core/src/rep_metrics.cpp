#include "depthkv/rep_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "depthkv/rng.hpp"
#include "text_io.hpp"

namespace depthkv {

namespace {

constexpr double kSingularCutoff = 1e-12;

Eigen::MatrixXd to_centered(MatrixView z) {
  Eigen::MatrixXd m(z.rows, z.cols);
  for (std::size_t r = 0; r < z.rows; ++r) {
    for (std::size_t c = 0; c < z.cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = z.at(r, c);
    }
  }
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  return m;
}

std::vector<double> l2_normalized(std::span<const double> v) {
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  std::vector<double> out(v.begin(), v.end());
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : out) x *= inv;
  } else {
    std::fill(out.begin(), out.end(), 0.0);
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

double spectral_entropy(MatrixView z) {
  if (z.rows < 2) {
    throw std::invalid_argument("spectral entropy needs at least two rows");
  }
  const Eigen::MatrixXd centered = to_centered(z);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::VectorXd& sv = svd.singularValues();

  const double s_max = sv.size() > 0 ? sv(0) : 0.0;
  if (s_max <= 0.0) {
    return 0.0;  // all-zero spectrum convention
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= kSingularCutoff * s_max) {
      total += sv(i);
    }
  }
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= kSingularCutoff * s_max) {
      const double p = sv(i) / total;
      if (p > 0.0) {
        entropy -= p * std::log(p);
      }
    }
  }
  return entropy;
}

double effective_rank(MatrixView z) { return std::exp(spectral_entropy(z)); }

double curvature(MatrixView z, std::uint32_t k) {
  if (k == 0) {
    throw std::invalid_argument("curvature needs k >= 1");
  }
  if (z.rows <= k) {
    throw std::invalid_argument("curvature needs more rows than neighbors");
  }

  const std::size_t t = z.rows;
  std::vector<std::vector<double>> rows(t);
  for (std::size_t r = 0; r < t; ++r) {
    std::vector<double> row(z.cols);
    for (std::size_t c = 0; c < z.cols; ++c) row[c] = z.at(r, c);
    rows[r] = l2_normalized(row);
  }

  double mean_of_means = 0.0;
  std::vector<std::size_t> order;
  std::vector<double> sims(t);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      sims[j] = dot(rows[i], rows[j]);
    }
    order.clear();
    for (std::size_t j = 0; j < t; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (sims[a] != sims[b]) return sims[a] > sims[b];
                        return a < b;
                      });
    double neighbor_sum = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
      neighbor_sum += sims[order[m]];
    }
    mean_of_means += neighbor_sum / static_cast<double>(k);
  }
  return 1.0 - mean_of_means / static_cast<double>(t);
}

double dime(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dime needs vectors of equal dimension");
  }
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) {
    return 1.0;
  }
  return 1.0 - dot(a, b) / (na * nb);
}

double lidar(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("lidar needs vectors of equal dimension");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

std::vector<double> mean_pool(MatrixView z) {
  if (z.rows == 0) {
    throw std::invalid_argument("mean_pool needs at least one row");
  }
  std::vector<double> out(z.cols, 0.0);
  for (std::size_t r = 0; r < z.rows; ++r) {
    for (std::size_t c = 0; c < z.cols; ++c) {
      out[c] += z.at(r, c);
    }
  }
  const double inv = 1.0 / static_cast<double>(z.rows);
  for (double& x : out) x *= inv;
  return out;
}

InfoNceResult infonce(const std::vector<std::vector<double>>& originals,
                      const std::vector<std::vector<double>>& augmenteds,
                      double temperature, DenominatorMode mode) {
  const std::size_t n = originals.size();
  if (n < 2) {
    throw std::invalid_argument("infonce needs at least two samples");
  }
  if (augmenteds.size() != n) {
    throw std::invalid_argument("infonce needs one augmented vector per original");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("infonce temperature must be positive");
  }

  std::vector<std::vector<double>> o_hat(n), a_hat(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (originals[i].size() != augmenteds[i].size()) {
      throw std::invalid_argument("infonce vector dimensions disagree");
    }
    o_hat[i] = l2_normalized(originals[i]);
    a_hat[i] = l2_normalized(augmenteds[i]);
  }

  InfoNceResult result;
  result.losses.resize(n);
  const double inv_tau = 1.0 / temperature;
  for (std::size_t i = 0; i < n; ++i) {
    const double positive = dot(o_hat[i], a_hat[i]) * inv_tau;
    // log-sum-exp over the denominator terms, shifted by the running max
    double max_term = positive;
    std::vector<double> terms;
    terms.reserve(n);
    if (mode == DenominatorMode::standard) {
      terms.push_back(positive);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        terms.push_back(dot(o_hat[i], o_hat[j]) * inv_tau);
      }
    } else {
      // literal form: all originals, positive pair not included
      for (std::size_t j = 0; j < n; ++j) {
        terms.push_back(dot(o_hat[i], o_hat[j]) * inv_tau);
      }
    }
    max_term = *std::max_element(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) {
      sum += std::exp(t - max_term);
    }
    result.losses[i] = -(positive - max_term - std::log(sum));
  }
  result.mean = std::accumulate(result.losses.begin(), result.losses.end(), 0.0) /
                static_cast<double>(n);
  return result;
}

std::pair<double, double> bootstrap_ci(std::span<const double> values,
                                       std::uint32_t resamples, double alpha,
                                       std::uint64_t seed) {
  const std::size_t n = values.size();
  if (n < 2) {
    throw std::invalid_argument("bootstrap needs at least two values");
  }
  if (resamples == 0) {
    throw std::invalid_argument("bootstrap needs at least one resample");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("bootstrap alpha must lie in (0, 1)");
  }

  const CounterRng root(seed);
  std::vector<double> means(resamples);
  for (std::uint32_t r = 0; r < resamples; ++r) {
    const CounterRng stream = root.derive(r);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sum += values[stream.below_at(k, n)];
    }
    means[r] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());

  auto percentile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, static_cast<std::size_t>(resamples - 1));
    const double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  return {percentile(alpha / 2.0), percentile(1.0 - alpha / 2.0)};
}

namespace {

constexpr const char* kSpectralMetrics[] = {"spectral_entropy", "effective_rank",
                                            "curvature"};
constexpr const char* kPairMetrics[] = {"dime", "lidar"};

// One bootstrap stream per report row, keyed by (layer, stage, metric slot).
std::uint64_t row_stream(std::uint32_t layer, std::size_t stage_index,
                         std::size_t metric_slot, std::size_t stage_count) {
  return (static_cast<std::uint64_t>(layer) * stage_count + stage_index) * 8 +
         metric_slot;
}

MetricReportRow make_row(std::uint32_t layer, Stage stage, std::string metric,
                         const std::vector<double>& samples,
                         const MetricConfig& config, std::uint64_t stream_id,
                         std::uint64_t seed) {
  MetricReportRow row;
  row.layer = layer;
  row.stage = stage;
  row.metric = std::move(metric);
  row.value = std::accumulate(samples.begin(), samples.end(), 0.0) /
              static_cast<double>(samples.size());
  if (samples.size() >= 2) {
    const auto [lo, hi] =
        bootstrap_ci(samples, config.bootstrap_resamples, config.bootstrap_alpha,
                     CounterRng(seed).derive(stream_id).seed());
    row.ci_low = lo;
    row.ci_high = hi;
  } else {
    row.ci_low = row.value;
    row.ci_high = row.value;
  }
  return row;
}

}  // namespace

MetricReport compute_metric_report(
    const std::vector<RepresentationSnapshot>& originals,
    const std::vector<RepresentationSnapshot>& augmenteds,
    const MetricConfig& config, std::uint64_t seed) {
  if (originals.empty()) {
    throw std::invalid_argument("metric report needs at least one snapshot");
  }
  const std::uint32_t layers = originals[0].num_layers();
  const auto& stages = originals[0].stages();
  const std::uint32_t dim = originals[0].hidden_dim();
  for (const auto& snap : originals) {
    if (snap.num_layers() != layers || snap.stages() != stages ||
        snap.hidden_dim() != dim) {
      throw std::invalid_argument("snapshots disagree on layers/stages/dim");
    }
  }
  const bool paired = !augmenteds.empty();
  if (paired) {
    if (augmenteds.size() != originals.size()) {
      throw std::invalid_argument("need one augmented snapshot per original");
    }
    for (const auto& snap : augmenteds) {
      if (snap.num_layers() != layers || snap.stages() != stages ||
          snap.hidden_dim() != dim) {
        throw std::invalid_argument("augmented snapshots disagree on shape");
      }
    }
  }

  const std::size_t n = originals.size();
  MetricReport report;
  for (std::uint32_t l = 0; l < layers; ++l) {
    for (std::size_t s = 0; s < stages.size(); ++s) {
      std::size_t slot = 0;

      std::vector<double> entropy(n), erank(n), curv(n);
      for (std::size_t i = 0; i < n; ++i) {
        const MatrixView z = originals[i].layer_stage(l, s);
        entropy[i] = spectral_entropy(z);
        erank[i] = std::exp(entropy[i]);
        curv[i] = curvature(z, config.knn_k);
      }
      const std::vector<double>* spectral[] = {&entropy, &erank, &curv};
      for (std::size_t m = 0; m < 3; ++m) {
        report.rows.push_back(make_row(l, stages[s], kSpectralMetrics[m],
                                       *spectral[m], config,
                                       row_stream(l, s, slot++, stages.size()),
                                       seed));
      }

      if (!paired) continue;

      std::vector<std::vector<double>> pooled_o(n), pooled_a(n);
      for (std::size_t i = 0; i < n; ++i) {
        pooled_o[i] = mean_pool(originals[i].layer_stage(l, s));
        pooled_a[i] = mean_pool(augmenteds[i].layer_stage(l, s));
      }
      std::vector<double> dime_vals(n), lidar_vals(n);
      for (std::size_t i = 0; i < n; ++i) {
        dime_vals[i] = dime(pooled_o[i], pooled_a[i]);
        lidar_vals[i] = lidar(pooled_o[i], pooled_a[i]);
      }
      const std::vector<double>* pairwise[] = {&dime_vals, &lidar_vals};
      for (std::size_t m = 0; m < 2; ++m) {
        report.rows.push_back(make_row(l, stages[s], kPairMetrics[m],
                                       *pairwise[m], config,
                                       row_stream(l, s, slot++, stages.size()),
                                       seed));
      }

      if (n >= 2) {
        const InfoNceResult nce = infonce(pooled_o, pooled_a, config.temperature,
                                          config.denominator_mode);
        report.rows.push_back(make_row(l, stages[s], "infonce", nce.losses,
                                       config,
                                       row_stream(l, s, slot++, stages.size()),
                                       seed));
      }
    }
  }
  return report;
}

std::string report_to_csv(const MetricReport& report) {
  std::string out = "layer,stage,metric,value,ci_low,ci_high\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.layer);
    out += ',';
    out += stage_name(row.stage);
    out += ',';
    out += row.metric;
    out += ',';
    out += detail::format_double(row.value);
    out += ',';
    out += detail::format_double(row.ci_low);
    out += ',';
    out += detail::format_double(row.ci_high);
    out += '\n';
  }
  return out;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"layer", row.layer},
                    {"stage", stage_name(row.stage)},
                    {"metric", row.metric},
                    {"value", row.value},
                    {"ci_low", row.ci_low},
                    {"ci_high", row.ci_high}});
  }
  return nlohmann::json{{"rows", rows}}.dump(2) + "\n";
}

}  // namespace depthkv
