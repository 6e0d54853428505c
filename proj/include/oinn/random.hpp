#pragma once

// Counter-based random numbers: the value for (seed, stream, index) is a pure
// function, so runs are reproducible across platforms and independent of the
// order in which draws are consumed. (std::uniform_real_distribution is
// implementation-defined and cannot give that.)

#include <cstdint>

namespace oinn::rng {

inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix(mix(mix(seed) ^ stream) ^ index);
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return static_cast<double>(bits(seed, stream, index) >> 11) * 0x1.0p-53;
}

// Stream tags keep unrelated consumers of one seed apart.
enum Stream : std::uint64_t {
  kInitW1 = 1,
  kInitW2 = 2,
  kBatch = 0x100,  // + iteration
};

}  // namespace oinn::rng
