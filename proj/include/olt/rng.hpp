#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace olt {

// All randomness flows through mt19937_64 plus the helpers below. The
// standard fixes the mt19937_64 sequence, and the mappings here avoid
// std::uniform_*_distribution, whose output differs between standard
// library implementations. Same seed, same stream, on every platform.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [-bound, bound).
inline double uniform_symmetric(Rng& rng, double bound) {
  return (2.0 * uniform01(rng) - 1.0) * bound;
}

// Uniform integer in [lo, hi] via rejection sampling (no modulo bias).
inline int64_t uniform_int(Rng& rng, int64_t lo, int64_t hi) {
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % span;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return lo + static_cast<int64_t>(x % span);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stable sub-seed derivation: mixes a master seed with a label so every
// tensor / stream gets an independent, order-insensitive seed.
inline uint64_t derive_seed(uint64_t master, std::string_view label) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return splitmix64(master ^ splitmix64(h));
}

inline uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
  return splitmix64(derive_seed(master, label) ^ splitmix64(index));
}

}  // namespace olt
