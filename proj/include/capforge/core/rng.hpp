#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace capforge {

// std::mt19937_64's output sequence is fixed by the standard, but the
// standard distributions are not. These helpers keep seeded runs identical
// across standard library implementations.

/// Uniform integer in [0, n), n > 0, by rejection sampling.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Uniform integer in [lo, hi].
inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Seed derived from a base seed and a label (first 8 bytes of sha256).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace capforge
