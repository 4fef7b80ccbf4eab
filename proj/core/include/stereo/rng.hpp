#pragma once

#include <cstdint>

namespace stereo {

/// Deterministic 64-bit PRNG (splitmix64 core). Self-contained so streams are
/// reproducible independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Derives an independent stream (e.g. per training step or sample).
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    Rng r(a ^ (0x632be59bd9b4e019ull + (b << 1)));
    r.next_u64();
    return r.next_u64() ^ b;
  }

 private:
  std::uint64_t state_;
};

}  // namespace stereo
