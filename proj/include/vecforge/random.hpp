#pragma once

#include <cstdint>
#include <random>

namespace vecforge {

// Every randomized routine takes one of these by reference. mt19937_64 has a
// standard-mandated output sequence, and the helpers below avoid the
// implementation-defined std:: distributions, so a seed reproduces the same
// run on every platform.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

inline float uniform_real(Rng& rng, float lo, float hi) {
  return lo + static_cast<float>(uniform01(rng)) * (hi - lo);
}

// Derives independent stream seeds (per worker, per document) from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace vecforge
