#pragma once

#include <cstdint>
#include <random>

namespace mce {

// Engine used everywhere a seeded generator is needed. The helpers below avoid
// std::*_distribution so draws are identical across standard libraries.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n), n > 0 (multiply-shift; bias is below 2^-32 for n < 2^32).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace mce
