#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace depthkv {

// samples x layers matrix of performance values. CSV on disk: first row is
// the header (layer labels), then one row per sample.
struct ScoreTable {
  std::size_t num_samples = 0;
  std::size_t num_layers = 0;
  std::vector<std::string> layer_labels;  // size num_layers
  std::vector<double> values;             // row-major [sample][layer]

  double at(std::size_t sample, std::size_t layer) const {
    return values[sample * num_layers + layer];
  }
  double& at(std::size_t sample, std::size_t layer) {
    return values[sample * num_layers + layer];
  }

  // Throws ParseError if shapes are inconsistent or any cell is non-finite.
  void validate() const;
};

ScoreTable load_score_table(const std::filesystem::path& path);
void save_score_table(const ScoreTable& table, const std::filesystem::path& path);

// Column means, one per layer.
std::vector<double> layer_means(const ScoreTable& table);

}  // namespace depthkv
