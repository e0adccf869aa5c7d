#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace medcurate {

using Rng = std::mt19937_64;

// Uniform integer in [0, bound). Rejection sampling keeps the result
// identical across standard library implementations, unlike
// std::uniform_int_distribution.
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

// 64-bit FNV-1a, used to derive stable sub-seeds from names.
inline std::uint64_t Fnv1a(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

inline std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace medcurate
