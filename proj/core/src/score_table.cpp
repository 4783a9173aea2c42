#include "depthkv/score_table.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "depthkv/errors.hpp"
#include "text_io.hpp"

namespace depthkv {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

}  // namespace

void ScoreTable::validate() const {
  if (num_samples == 0 || num_layers == 0) {
    throw ParseError(ParseErrc::bad_csv, "score table must be non-empty");
  }
  if (layer_labels.size() != num_layers ||
      values.size() != num_samples * num_layers) {
    throw ParseError(ParseErrc::bad_csv, "score table shape mismatch");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ParseError(ParseErrc::non_finite, "non-finite score table cell");
    }
  }
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open score table: " + path.string());
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(ParseErrc::bad_csv, "empty score table: " + path.string());
  }

  ScoreTable table;
  table.layer_labels = split_csv_line(strip_cr(line));
  table.num_layers = table.layer_labels.size();
  if (table.num_layers == 0) {
    throw ParseError(ParseErrc::bad_csv, "score table header has no columns");
  }

  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != table.num_layers) {
      throw ParseError(ParseErrc::bad_csv,
                       "score table row " + std::to_string(row_number) +
                           " has " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(table.num_layers));
    }
    for (const auto& cell : cells) {
      double v = 0.0;
      if (!detail::parse_double(cell, v)) {
        throw ParseError(ParseErrc::bad_csv,
                         "score table row " + std::to_string(row_number) +
                             ": cannot parse cell '" + cell + "'");
      }
      table.values.push_back(v);
    }
    ++table.num_samples;
  }

  table.validate();
  return table;
}

void save_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  table.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open score table for writing: " + path.string());
  }
  for (std::size_t l = 0; l < table.num_layers; ++l) {
    if (l) out << ',';
    out << table.layer_labels[l];
  }
  out << '\n';
  for (std::size_t s = 0; s < table.num_samples; ++s) {
    for (std::size_t l = 0; l < table.num_layers; ++l) {
      if (l) out << ',';
      out << detail::format_double(table.at(s, l));
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("write failed for score table: " + path.string());
  }
}

std::vector<double> layer_means(const ScoreTable& table) {
  std::vector<double> means(table.num_layers, 0.0);
  for (std::size_t l = 0; l < table.num_layers; ++l) {
    double sum = 0.0;
    for (std::size_t s = 0; s < table.num_samples; ++s) {
      sum += table.at(s, l);
    }
    means[l] = sum / static_cast<double>(table.num_samples);
  }
  return means;
}

}  // namespace depthkv
