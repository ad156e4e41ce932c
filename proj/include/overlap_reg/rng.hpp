#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace overlap_reg {

// All randomized code in the library draws through these helpers instead of
// <random> distributions, whose output is implementation-defined. The engine
// itself (mt19937_64) is specified exactly by the standard, so seeded runs
// reproduce bit-for-bit on any platform.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_double(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

// Unbiased uniform integer in [0, n). Rejection sampling.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t min = (-n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = rng();
    if (x >= min) return x % n;
  }
}

// Standard normal via Box-Muller. Two engine draws per sample.
inline double normal_double(Rng& rng) {
  const double u1 = 1.0 - uniform_double(rng);  // (0, 1]
  const double u2 = uniform_double(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

inline double normal_double(Rng& rng, double mean, double sigma) {
  return mean + sigma * normal_double(rng);
}

}  // namespace overlap_reg
