#pragma once

#include <cstdint>

namespace aet {

/// SplitMix64 (Steele, Lea, Flood 2014): 64-bit state advanced by
/// 0x9e3779b97f4a7c15, output mixed with constants 0xbf58476d1ce4e5b9 and
/// 0x94d049bb133111eb. The bit stream is fully specified, so other
/// implementations reproduce it exactly.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Standard normal draws via Box-Muller on a SplitMix64 stream. Each pair of
/// uniforms (u1, u2) yields sqrt(-2 ln(1 - u1)) * (cos(2 pi u2), sin(2 pi u2)),
/// cosine first.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next();

 private:
  SplitMix64 rng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace aet
