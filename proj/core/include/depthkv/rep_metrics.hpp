#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "depthkv/matrix_view.hpp"
#include "depthkv/snapshot.hpp"

namespace depthkv {

// Which terms enter the InfoNCE denominator. `standard` includes the positive
// pair next to the j != i negatives; `literal` sums exp(sim(o_i, o_j)/tau)
// over all j, positive pair excluded.
enum class DenominatorMode { standard, literal };

struct MetricConfig {
  std::uint32_t knn_k = 5;
  double temperature = 0.1;
  double drop_prob = 0.1;
  std::uint32_t bootstrap_resamples = 1000;
  double bootstrap_alpha = 0.05;
  DenominatorMode denominator_mode = DenominatorMode::standard;
};

// Entropy of the normalized singular values of the row-centered matrix,
// with 0 * log 0 = 0 and H = 0 for an all-zero spectrum. Requires T >= 2.
double spectral_entropy(MatrixView z);

// exp(spectral_entropy).
double effective_rank(MatrixView z);

// One minus the average cosine similarity between each row and its k nearest
// neighbors (rows l2-normalized, zero rows mapped to zero, neighbor ties to
// the lower index). Requires T >= k + 1.
double curvature(MatrixView z, std::uint32_t k);

// Cosine distance; 1 if either vector has zero norm.
double dime(std::span<const double> a, std::span<const double> b);

// Euclidean distance. Throws std::invalid_argument on dimension mismatch.
double lidar(std::span<const double> a, std::span<const double> b);

// Arithmetic mean of the rows. Requires T >= 1.
std::vector<double> mean_pool(MatrixView z);

struct InfoNceResult {
  std::vector<double> losses;  // one per sample
  double mean = 0.0;
};

// Contrastive loss over l2-normalized mean-pooled representations: positives
// are (original_i, augmented_i), negatives the other originals in the batch.
// Requires n >= 2 and temperature > 0.
InfoNceResult infonce(const std::vector<std::vector<double>>& originals,
                      const std::vector<std::vector<double>>& augmenteds,
                      double temperature,
                      DenominatorMode mode = DenominatorMode::standard);

// Percentile bootstrap of the mean: resample with replacement, return the
// (alpha/2, 1-alpha/2) empirical percentiles of the resample means with
// linear interpolation. Deterministic per seed. Requires >= 2 values.
std::pair<double, double> bootstrap_ci(std::span<const double> values,
                                       std::uint32_t resamples, double alpha,
                                       std::uint64_t seed);

struct MetricReportRow {
  std::uint32_t layer = 0;
  Stage stage = Stage::pre_attention;
  std::string metric;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct MetricReport {
  std::vector<MetricReportRow> rows;
};

// Per (layer, stage, metric) means across samples with bootstrap intervals.
// Spectral and curvature metrics use the original snapshots only; DiME,
// LiDAR and InfoNCE need `augmenteds` (empty to skip them, otherwise one
// augmented snapshot per original). InfoNCE rows require >= 2 samples.
MetricReport compute_metric_report(
    const std::vector<RepresentationSnapshot>& originals,
    const std::vector<RepresentationSnapshot>& augmenteds,
    const MetricConfig& config, std::uint64_t seed);

// CSV with header "layer,stage,metric,value,ci_low,ci_high".
std::string report_to_csv(const MetricReport& report);
std::string report_to_json(const MetricReport& report);

}  // namespace depthkv
