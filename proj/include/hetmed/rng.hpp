#pragma once

#include <cstdint>

namespace hetmed {

// SplitMix64 output function: a bijective 64-bit mix (Steele, Lea & Flood).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Splittable counter-based stream. A stream is a pure function of
// (master_seed, stream_index), so replicate r of a Monte Carlo run draws the
// same numbers no matter which thread runs it or in what order. Sampling is
// inverse-CDF from the uniform stream, keeping sequences identical across
// platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix64(seed + GOLDEN)) {}

  // Substream for replicate `index` under `master_seed`.
  static RngStream substream(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(mix64(master_seed ^ 0x5851F42D4C957F2DULL) + mix64(index + 1));
  }

  std::uint64_t next_u64() {
    state_ += GOLDEN;
    return mix64(state_);
  }

  // Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal();  // standard normal via inverse CDF

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  static constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL;
  std::uint64_t state_;
};

}  // namespace hetmed
