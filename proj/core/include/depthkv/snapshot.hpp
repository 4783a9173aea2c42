#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthkv/matrix_view.hpp"

namespace depthkv {

// Hook points within a transformer block at which representations are taken.
enum class Stage : std::uint32_t {
  pre_attention = 0,
  post_attention = 1,
  post_attention_residual = 2,
  post_mlp = 3,
};

const char* stage_name(Stage stage);

enum class PairTag : std::uint8_t { original = 0, augmented = 1 };

// Per-layer, per-stage token-by-feature matrices Z for one sample. A paired
// original/augmented snapshot shares L, stages and d; the augmented side may
// have fewer token rows after dropout.
class RepresentationSnapshot {
 public:
  RepresentationSnapshot() = default;
  RepresentationSnapshot(std::uint32_t num_layers, std::vector<Stage> stages,
                         std::uint32_t seq_len, std::uint32_t hidden_dim,
                         PairTag pair_tag, std::vector<float> z);

  std::uint32_t num_layers() const { return num_layers_; }
  const std::vector<Stage>& stages() const { return stages_; }
  std::uint32_t seq_len() const { return seq_len_; }
  std::uint32_t hidden_dim() const { return hidden_dim_; }
  PairTag pair_tag() const { return pair_tag_; }
  const std::vector<float>& z_tensor() const { return z_; }

  // T x d matrix of layer `layer` at stages()[stage_index].
  MatrixView layer_stage(std::uint32_t layer, std::size_t stage_index) const;

  bool operator==(const RepresentationSnapshot&) const = default;

 private:
  std::uint32_t num_layers_ = 0;
  std::vector<Stage> stages_;
  std::uint32_t seq_len_ = 0;
  std::uint32_t hidden_dim_ = 0;
  PairTag pair_tag_ = PairTag::original;
  std::vector<float> z_;  // [layer][stage][token][dim]
};

// Binary snapshot container ("DKVR"). Layout, all little-endian:
//   magic "DKVR"; version (uint32, =1); L (uint32); stage count (uint32);
//   stage ids (uint32 each, values 0-3); T (uint32); d (uint32);
//   pair tag (1 byte, 0=original 1=augmented);
//   payload: Z matrices in (layer, stage) order, row-major float32.
RepresentationSnapshot load_snapshot(const std::filesystem::path& path);
void save_snapshot(const RepresentationSnapshot& snapshot,
                   const std::filesystem::path& path);

// Token-row dropout: row r of an original snapshot survives iff
// CounterRng(seed).uniform_at(r) >= drop_prob; the same surviving rows apply
// to every (layer, stage). If no row survives, row 0 is retained.
RepresentationSnapshot perturb_snapshot(const RepresentationSnapshot& snapshot,
                                        double drop_prob, std::uint64_t seed);

// The surviving-row rule of perturb_snapshot, exposed for callers that need
// the index set itself.
std::vector<std::uint32_t> surviving_rows(std::uint32_t seq_len, double drop_prob,
                                          std::uint64_t seed);

}  // namespace depthkv
