#pragma once

#include <cstdint>

#include "seldr/normal.hpp"

namespace seldr {

// Counter-based random streams: every variate is a pure function of
// (seed, stream, index), so draw order and thread scheduling never change
// the output.
namespace rng {

inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix(seed ^ mix(stream ^ mix(index)));
}

/// Uniform draw on the open interval (0,1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t bits = key(seed, stream, index);
  return (bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

/// Standard normal draw by inverse CDF.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return norm_quantile(uniform(seed, stream, index));
}

/// Derives a child seed, e.g. one per Monte Carlo replicate.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  return mix(seed ^ mix(index + 0x5851f42d4c957f2dULL));
}

}  // namespace rng
}  // namespace seldr
