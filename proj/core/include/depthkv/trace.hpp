#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace depthkv {

// Shape of an attention trace: L layers, H heads, N tokens, d_k key/query
// width, d_v value width.
struct TraceHeader {
  std::uint32_t num_layers = 0;
  std::uint32_t num_heads = 0;
  std::uint32_t seq_len = 0;
  std::uint32_t key_dim = 0;
  std::uint32_t value_dim = 0;

  std::size_t qk_floats() const {
    return static_cast<std::size_t>(num_layers) * num_heads * seq_len * key_dim;
  }
  std::size_t v_floats() const {
    return static_cast<std::size_t>(num_layers) * num_heads * seq_len * value_dim;
  }
  std::size_t payload_floats() const { return 2 * qk_floats() + v_floats(); }

  // Throws ParseError(bad_header) if any field is zero.
  void validate() const;

  bool operator==(const TraceHeader&) const = default;
};

// Per-layer, per-head Q/K/V tensors for a token prefix. Tensors are stored
// row-major as [layer][head][token][dim]. Immutable after construction.
class AttentionTrace {
 public:
  AttentionTrace() = default;
  AttentionTrace(TraceHeader header, std::vector<float> q, std::vector<float> k,
                 std::vector<float> v);

  const TraceHeader& header() const { return header_; }
  std::uint32_t num_layers() const { return header_.num_layers; }
  std::uint32_t num_heads() const { return header_.num_heads; }
  std::uint32_t seq_len() const { return header_.seq_len; }
  std::uint32_t key_dim() const { return header_.key_dim; }
  std::uint32_t value_dim() const { return header_.value_dim; }

  std::span<const float> q_row(std::uint32_t layer, std::uint32_t head,
                               std::uint32_t token) const {
    return {q_.data() + qk_offset(layer, head, token), header_.key_dim};
  }
  std::span<const float> k_row(std::uint32_t layer, std::uint32_t head,
                               std::uint32_t token) const {
    return {k_.data() + qk_offset(layer, head, token), header_.key_dim};
  }
  std::span<const float> v_row(std::uint32_t layer, std::uint32_t head,
                               std::uint32_t token) const {
    return {v_.data() + v_offset(layer, head, token), header_.value_dim};
  }

  const std::vector<float>& q_tensor() const { return q_; }
  const std::vector<float>& k_tensor() const { return k_; }
  const std::vector<float>& v_tensor() const { return v_; }

  bool operator==(const AttentionTrace&) const = default;

 private:
  std::size_t qk_offset(std::uint32_t layer, std::uint32_t head,
                        std::uint32_t token) const {
    return ((static_cast<std::size_t>(layer) * header_.num_heads + head) *
                header_.seq_len +
            token) *
           header_.key_dim;
  }
  std::size_t v_offset(std::uint32_t layer, std::uint32_t head,
                       std::uint32_t token) const {
    return ((static_cast<std::size_t>(layer) * header_.num_heads + head) *
                header_.seq_len +
            token) *
           header_.value_dim;
  }

  TraceHeader header_;
  std::vector<float> q_;
  std::vector<float> k_;
  std::vector<float> v_;
};

// Binary trace container ("DKVT"). Layout, all little-endian:
//   bytes 0-3   magic "DKVT"
//   bytes 4-7   format version (uint32, currently 1)
//   bytes 8-27  L, H, N, d_k, d_v (uint32 each)
//   payload     per layer, per head: Q rows, then K rows, then V rows,
//               each row-major float32
AttentionTrace load_trace(const std::filesystem::path& path);
void save_trace(const AttentionTrace& trace, const std::filesystem::path& path);

// Deterministic test substrate: every tensor entry is a standard-normal draw
// from CounterRng(seed), with one global counter running over Q, then K,
// then V in storage order. Identical for identical (dims, seed).
AttentionTrace generate_synthetic_trace(std::uint32_t num_layers,
                                        std::uint32_t num_heads,
                                        std::uint32_t seq_len,
                                        std::uint32_t key_dim,
                                        std::uint32_t value_dim,
                                        std::uint64_t seed);

}  // namespace depthkv
