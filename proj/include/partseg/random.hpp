#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace partseg {

// The standard distributions are implementation-defined; these helpers keep
// every seeded draw identical across standard libraries.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

/// Box-Muller, one draw per call.
inline double normal01(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925;
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace partseg
