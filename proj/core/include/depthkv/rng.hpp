#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace depthkv {

// splitmix64 finalizer. Bijective on 64-bit words with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Counter-based random stream. Draw i of the stream keyed by `seed` is
//
//   bits_at(i) = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)
//
// i.e. the splitmix64 sequence addressed by counter instead of by mutable
// state. Every draw is randomly accessible, so threaded consumers replay the
// exact same stream as a sequential one. Child streams (`derive`) hash the
// stream id against a salted key, keeping child seeds disjoint from this
// stream's own outputs.
class CounterRng {
 public:
  static constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

  constexpr explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  constexpr std::uint64_t bits_at(std::uint64_t index) const noexcept {
    return mix64(seed_ + (index + 1) * kGoldenGamma);
  }

  // Uniform double in the open interval (0,1): the 53 high bits of the draw,
  // offset by half an ulp so neither endpoint is reachable.
  double uniform_at(std::uint64_t index) const noexcept {
    return (static_cast<double>(bits_at(index) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound) by 128-bit multiply-shift.
  std::uint64_t below_at(std::uint64_t index, std::uint64_t bound) const noexcept {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(bits_at(index)) * bound) >> 64);
  }

  // Standard normal via Box-Muller on uniform draws (2i, 2i+1). The uniform
  // mapping never returns 0, so the log is always finite.
  double normal_at(std::uint64_t index) const noexcept {
    const double u1 = uniform_at(2 * index);
    const double u2 = uniform_at(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  constexpr CounterRng derive(std::uint64_t stream) const noexcept {
    return CounterRng(mix64((seed_ ^ kStreamSalt) + (stream + 1) * kGoldenGamma));
  }

 private:
  static constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  std::uint64_t seed_;
};

// Fisher-Yates shuffle driven by draws base_index, base_index+1, ... of `rng`.
// Consumes exactly n-1 draws for n elements.
template <typename RandomIt>
void counter_shuffle(RandomIt first, RandomIt last, const CounterRng& rng,
                     std::uint64_t base_index = 0) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t j = n; j > 1; --j) {
    const std::uint64_t r = rng.below_at(base_index + (n - j), j);
    std::swap(first[j - 1], first[r]);
  }
}

}  // namespace depthkv
