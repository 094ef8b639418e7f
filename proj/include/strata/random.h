#ifndef STRATA_RANDOM_H_
#define STRATA_RANDOM_H_

#include <cstdint>
#include <random>

namespace strata {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr uint64_t split_mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed of the index-th independent stream under `seed`. Every per-tree,
// per-iteration and per-repetition seed in the project is derived this way,
// so results never depend on scheduling.
constexpr uint64_t split_mix(uint64_t seed, uint64_t index) {
  return split_mix64(seed ^ split_mix64(index));
}

}  // namespace strata

#endif  // STRATA_RANDOM_H_
