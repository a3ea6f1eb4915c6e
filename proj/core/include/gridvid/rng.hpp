#pragma once

#include <cstdint>
#include <random>

namespace gridvid {

// splitmix64, used both as a seed mixer and to derive independent streams.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// All randomness flows through mt19937_64 instances seeded from a master seed
// plus a stream index, so each consumer (candidate, scene, init) is
// individually reproducible.
inline std::mt19937_64 make_stream(uint64_t master_seed, uint64_t stream) {
  return std::mt19937_64(splitmix64(master_seed ^ splitmix64(stream)));
}

// Uniform in [0,1) with 53 random bits; avoids std::uniform_real_distribution
// so draws are identical across standard library implementations.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection, portable across stdlibs.
inline uint64_t uniform_below(std::mt19937_64& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Uniform real in [lo, hi).
inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace gridvid
