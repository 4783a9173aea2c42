#include "depthkv/snapshot.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "depthkv/errors.hpp"
#include "depthkv/rng.hpp"

namespace depthkv {

namespace {

constexpr unsigned char kSnapshotMagic[4] = {'D', 'K', 'V', 'R'};
constexpr std::uint32_t kSnapshotVersion = 1;

}  // namespace

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::pre_attention: return "pre_attention";
    case Stage::post_attention: return "post_attention";
    case Stage::post_attention_residual: return "post_attention_residual";
    case Stage::post_mlp: return "post_mlp";
  }
  return "unknown";
}

RepresentationSnapshot::RepresentationSnapshot(std::uint32_t num_layers,
                                               std::vector<Stage> stages,
                                               std::uint32_t seq_len,
                                               std::uint32_t hidden_dim,
                                               PairTag pair_tag,
                                               std::vector<float> z)
    : num_layers_(num_layers),
      stages_(std::move(stages)),
      seq_len_(seq_len),
      hidden_dim_(hidden_dim),
      pair_tag_(pair_tag),
      z_(std::move(z)) {
  if (num_layers_ == 0 || stages_.empty() || seq_len_ == 0 || hidden_dim_ == 0) {
    throw std::invalid_argument("snapshot dimensions must be >= 1");
  }
  const std::size_t expected = static_cast<std::size_t>(num_layers_) *
                               stages_.size() * seq_len_ * hidden_dim_;
  if (z_.size() != expected) {
    throw std::invalid_argument("snapshot tensor size does not match shape");
  }
}

MatrixView RepresentationSnapshot::layer_stage(std::uint32_t layer,
                                               std::size_t stage_index) const {
  if (layer >= num_layers_ || stage_index >= stages_.size()) {
    throw std::out_of_range("snapshot layer/stage out of range");
  }
  const std::size_t matrix = static_cast<std::size_t>(seq_len_) * hidden_dim_;
  const std::size_t offset =
      (static_cast<std::size_t>(layer) * stages_.size() + stage_index) * matrix;
  return MatrixView{z_.data() + offset, seq_len_, hidden_dim_};
}

RepresentationSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open snapshot file: " + path.string());
  }

  unsigned char magic[4];
  if (!detail::read_exact(in, magic, 4)) {
    throw ParseError(ParseErrc::truncated, "file too short for snapshot magic");
  }
  if (std::memcmp(magic, kSnapshotMagic, 4) != 0) {
    throw ParseError(ParseErrc::bad_magic,
                     "not a snapshot file (bad magic): " + path.string());
  }
  const std::uint32_t version = detail::read_u32_or_throw(in, "version");
  if (version != kSnapshotVersion) {
    throw ParseError(ParseErrc::bad_header,
                     "unsupported snapshot version " + std::to_string(version));
  }

  const std::uint32_t num_layers = detail::read_u32_or_throw(in, "num_layers");
  const std::uint32_t stage_count = detail::read_u32_or_throw(in, "stage_count");
  if (num_layers == 0 || stage_count == 0 || stage_count > 4) {
    throw ParseError(ParseErrc::bad_header, "invalid snapshot layer/stage counts");
  }

  std::vector<Stage> stages(stage_count);
  bool seen[4] = {false, false, false, false};
  for (std::uint32_t i = 0; i < stage_count; ++i) {
    const std::uint32_t id = detail::read_u32_or_throw(in, "stage id");
    if (id > 3 || seen[id]) {
      throw ParseError(ParseErrc::bad_header,
                       "invalid or repeated snapshot stage id " + std::to_string(id));
    }
    seen[id] = true;
    stages[i] = static_cast<Stage>(id);
  }

  const std::uint32_t seq_len = detail::read_u32_or_throw(in, "seq_len");
  const std::uint32_t hidden_dim = detail::read_u32_or_throw(in, "hidden_dim");
  if (seq_len == 0 || hidden_dim == 0) {
    throw ParseError(ParseErrc::bad_header, "invalid snapshot matrix shape");
  }

  unsigned char tag_byte;
  if (!detail::read_exact(in, &tag_byte, 1)) {
    throw ParseError(ParseErrc::truncated, "truncated while reading pair tag");
  }
  if (tag_byte > 1) {
    throw ParseError(ParseErrc::bad_header,
                     "invalid pair tag " + std::to_string(tag_byte));
  }

  const std::size_t count = static_cast<std::size_t>(num_layers) * stage_count *
                            seq_len * hidden_dim;
  std::vector<float> z(count);
  std::vector<unsigned char> buf(count * 4);
  if (!detail::read_exact(in, buf.data(), buf.size())) {
    throw ParseError(ParseErrc::truncated,
                     "snapshot payload shorter than header implies");
  }
  for (std::size_t i = 0; i < count; ++i) {
    z[i] = detail::decode_f32(buf.data() + i * 4);
    if (!std::isfinite(z[i])) {
      throw ParseError(ParseErrc::non_finite, "non-finite value in snapshot tensor");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(ParseErrc::trailing_data,
                     "snapshot file has bytes past the declared payload");
  }

  return RepresentationSnapshot(num_layers, std::move(stages), seq_len,
                                hidden_dim, static_cast<PairTag>(tag_byte),
                                std::move(z));
}

void save_snapshot(const RepresentationSnapshot& snapshot,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open snapshot file for writing: " + path.string());
  }

  out.write(reinterpret_cast<const char*>(kSnapshotMagic), 4);
  detail::write_u32(out, kSnapshotVersion);
  detail::write_u32(out, snapshot.num_layers());
  detail::write_u32(out, static_cast<std::uint32_t>(snapshot.stages().size()));
  for (Stage s : snapshot.stages()) {
    detail::write_u32(out, static_cast<std::uint32_t>(s));
  }
  detail::write_u32(out, snapshot.seq_len());
  detail::write_u32(out, snapshot.hidden_dim());
  const unsigned char tag = static_cast<unsigned char>(snapshot.pair_tag());
  out.write(reinterpret_cast<const char*>(&tag), 1);
  for (float x : snapshot.z_tensor()) {
    detail::write_f32(out, x);
  }

  if (!out) {
    throw IoError("write failed for snapshot file: " + path.string());
  }
}

std::vector<std::uint32_t> surviving_rows(std::uint32_t seq_len, double drop_prob,
                                          std::uint64_t seed) {
  if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
    throw std::invalid_argument("drop_prob must lie in [0, 1)");
  }
  const CounterRng rng(seed);
  std::vector<std::uint32_t> rows;
  rows.reserve(seq_len);
  for (std::uint32_t r = 0; r < seq_len; ++r) {
    if (rng.uniform_at(r) >= drop_prob) {
      rows.push_back(r);
    }
  }
  if (rows.empty()) {
    rows.push_back(0);  // downstream pooling needs at least one row
  }
  return rows;
}

RepresentationSnapshot perturb_snapshot(const RepresentationSnapshot& snapshot,
                                        double drop_prob, std::uint64_t seed) {
  if (snapshot.pair_tag() != PairTag::original) {
    throw std::invalid_argument("perturb_snapshot expects an original snapshot");
  }
  const std::vector<std::uint32_t> rows =
      surviving_rows(snapshot.seq_len(), drop_prob, seed);

  const std::size_t stage_count = snapshot.stages().size();
  const std::uint32_t dim = snapshot.hidden_dim();
  std::vector<float> z;
  z.reserve(static_cast<std::size_t>(snapshot.num_layers()) * stage_count *
            rows.size() * dim);
  for (std::uint32_t l = 0; l < snapshot.num_layers(); ++l) {
    for (std::size_t s = 0; s < stage_count; ++s) {
      const MatrixView m = snapshot.layer_stage(l, s);
      for (std::uint32_t r : rows) {
        const auto row = m.row(r);
        z.insert(z.end(), row.begin(), row.end());
      }
    }
  }

  return RepresentationSnapshot(snapshot.num_layers(), snapshot.stages(),
                                static_cast<std::uint32_t>(rows.size()), dim,
                                PairTag::augmented, std::move(z));
}

}  // namespace depthkv
