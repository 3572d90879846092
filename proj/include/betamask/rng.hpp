#pragma once

#include <cstdint>
#include <random>

namespace betamask {

using Rng = std::mt19937_64;

/// Independent generator per (seed, stream) pair, so components that
/// share a user seed do not share a sequence.
inline Rng make_rng(std::uint64_t seed, std::uint32_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream, 0x62656d61u};
  return Rng(seq);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace betamask
