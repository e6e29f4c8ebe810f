#pragma once

#include <cstdint>
#include <random>

namespace dream {

using rng_t = std::mt19937_64;

// splitmix64 finaliser; used to derive independent child seeds from a master seed.
inline constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                           std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(master ^ mix_seed(stream)) + index);
}

inline double uniform(rng_t& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(rng_t& rng, double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

}  // namespace dream
