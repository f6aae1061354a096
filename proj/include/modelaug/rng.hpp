#pragma once

#include <cmath>
#include <cstdint>

namespace modelaug {

// SplitMix64. All seeded behaviour in the library (splits, weight init,
// augmentation draws, synthetic data) flows through this generator so that
// runs reproduce bit-exactly across implementations:
//   state += 0x9e3779b97f4a7c15
//   z = state; z = (z ^ z>>30) * 0xbf58476d1ce4e5b9
//   z = (z ^ z>>27) * 0x94d049bb133111eb
//   output = z ^ z>>31
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1): top 53 bits scaled by 2^-53.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in [0, n): output modulo n.  The modulo mapping is part of the
  // reproducibility contract.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Standard normal via Box-Muller; consumes exactly two outputs per call.
  double normal() {
    double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace modelaug
