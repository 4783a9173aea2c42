#include "depthkv/trace.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "binary_io.hpp"
#include "depthkv/errors.hpp"
#include "depthkv/rng.hpp"

namespace depthkv {

namespace {

constexpr unsigned char kTraceMagic[4] = {'D', 'K', 'V', 'T'};
constexpr std::uint32_t kTraceVersion = 1;

void check_finite(const std::vector<float>& tensor, const char* name) {
  for (float v : tensor) {
    if (!std::isfinite(v)) {
      throw ParseError(ParseErrc::non_finite,
                       std::string("non-finite value in ") + name + " tensor");
    }
  }
}

std::vector<float> read_rows(std::istream& in, std::size_t count,
                             const char* name) {
  std::vector<float> out(count);
  std::vector<unsigned char> buf(count * 4);
  if (!detail::read_exact(in, buf.data(), buf.size())) {
    throw ParseError(ParseErrc::truncated,
                     std::string("payload shorter than header implies (") +
                         name + " tensor)");
  }
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = detail::decode_f32(buf.data() + i * 4);
  }
  return out;
}

}  // namespace

void TraceHeader::validate() const {
  if (num_layers == 0 || num_heads == 0 || seq_len == 0 || key_dim == 0 ||
      value_dim == 0) {
    throw ParseError(ParseErrc::bad_header,
                     "trace header has a zero dimension");
  }
}

AttentionTrace::AttentionTrace(TraceHeader header, std::vector<float> q,
                               std::vector<float> k, std::vector<float> v)
    : header_(header), q_(std::move(q)), k_(std::move(k)), v_(std::move(v)) {
  header_.validate();
  if (q_.size() != header_.qk_floats() || k_.size() != header_.qk_floats() ||
      v_.size() != header_.v_floats()) {
    throw std::invalid_argument("tensor sizes do not match the trace header");
  }
}

AttentionTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open trace file: " + path.string());
  }

  unsigned char magic[4];
  if (!detail::read_exact(in, magic, 4)) {
    throw ParseError(ParseErrc::truncated, "file too short for trace magic");
  }
  if (std::memcmp(magic, kTraceMagic, 4) != 0) {
    throw ParseError(ParseErrc::bad_magic,
                     "not a trace file (bad magic): " + path.string());
  }
  const std::uint32_t version = detail::read_u32_or_throw(in, "version");
  if (version != kTraceVersion) {
    throw ParseError(ParseErrc::bad_header,
                     "unsupported trace version " + std::to_string(version));
  }

  TraceHeader header;
  header.num_layers = detail::read_u32_or_throw(in, "num_layers");
  header.num_heads = detail::read_u32_or_throw(in, "num_heads");
  header.seq_len = detail::read_u32_or_throw(in, "seq_len");
  header.key_dim = detail::read_u32_or_throw(in, "key_dim");
  header.value_dim = detail::read_u32_or_throw(in, "value_dim");
  header.validate();

  const std::size_t rows =
      static_cast<std::size_t>(header.num_layers) * header.num_heads;
  const std::size_t q_per_head = static_cast<std::size_t>(header.seq_len) * header.key_dim;
  const std::size_t v_per_head = static_cast<std::size_t>(header.seq_len) * header.value_dim;

  std::vector<float> q, k, v;
  q.reserve(header.qk_floats());
  k.reserve(header.qk_floats());
  v.reserve(header.v_floats());

  // Payload interleaves per (layer, head): Q block, K block, V block.
  for (std::size_t lh = 0; lh < rows; ++lh) {
    auto qb = read_rows(in, q_per_head, "Q");
    auto kb = read_rows(in, q_per_head, "K");
    auto vb = read_rows(in, v_per_head, "V");
    q.insert(q.end(), qb.begin(), qb.end());
    k.insert(k.end(), kb.begin(), kb.end());
    v.insert(v.end(), vb.begin(), vb.end());
  }

  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(ParseErrc::trailing_data,
                     "trace file has bytes past the declared payload");
  }

  check_finite(q, "Q");
  check_finite(k, "K");
  check_finite(v, "V");

  return AttentionTrace(header, std::move(q), std::move(k), std::move(v));
}

void save_trace(const AttentionTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open trace file for writing: " + path.string());
  }

  const TraceHeader& h = trace.header();
  out.write(reinterpret_cast<const char*>(kTraceMagic), 4);
  detail::write_u32(out, kTraceVersion);
  detail::write_u32(out, h.num_layers);
  detail::write_u32(out, h.num_heads);
  detail::write_u32(out, h.seq_len);
  detail::write_u32(out, h.key_dim);
  detail::write_u32(out, h.value_dim);

  for (std::uint32_t l = 0; l < h.num_layers; ++l) {
    for (std::uint32_t head = 0; head < h.num_heads; ++head) {
      for (std::uint32_t t = 0; t < h.seq_len; ++t) {
        for (float x : trace.q_row(l, head, t)) detail::write_f32(out, x);
      }
      for (std::uint32_t t = 0; t < h.seq_len; ++t) {
        for (float x : trace.k_row(l, head, t)) detail::write_f32(out, x);
      }
      for (std::uint32_t t = 0; t < h.seq_len; ++t) {
        for (float x : trace.v_row(l, head, t)) detail::write_f32(out, x);
      }
    }
  }

  if (!out) {
    throw IoError("write failed for trace file: " + path.string());
  }
}

AttentionTrace generate_synthetic_trace(std::uint32_t num_layers,
                                        std::uint32_t num_heads,
                                        std::uint32_t seq_len,
                                        std::uint32_t key_dim,
                                        std::uint32_t value_dim,
                                        std::uint64_t seed) {
  if (num_layers == 0 || num_heads == 0 || seq_len == 0 || key_dim == 0 ||
      value_dim == 0) {
    throw std::invalid_argument("synthetic trace dimensions must be >= 1");
  }

  TraceHeader header{num_layers, num_heads, seq_len, key_dim, value_dim};
  const CounterRng rng(seed);

  const std::size_t nq = header.qk_floats();
  const std::size_t nv = header.v_floats();
  std::vector<float> q(nq), k(nq), v(nv);
  // One counter runs over Q, then K, then V in storage order.
  for (std::size_t i = 0; i < nq; ++i) {
    q[i] = static_cast<float>(rng.normal_at(i));
  }
  for (std::size_t i = 0; i < nq; ++i) {
    k[i] = static_cast<float>(rng.normal_at(nq + i));
  }
  for (std::size_t i = 0; i < nv; ++i) {
    v[i] = static_cast<float>(rng.normal_at(2 * nq + i));
  }
  return AttentionTrace(header, std::move(q), std::move(k), std::move(v));
}

}  // namespace depthkv
