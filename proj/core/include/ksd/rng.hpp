#pragma once

#include <cstdint>
#include <random>

namespace ksd {

using Engine = std::mt19937_64;

// Purpose tags keep the substreams of different consumers disjoint even when
// they share a user seed.
enum class Stream : std::uint32_t {
  kEnsemble = 1,
  kCellVolume = 2,
  kReversedVolume = 3,
  kBootstrap = 4,
  kLyapunov = 5,
  kOracle = 6,
  kUniform = 7,
  kBackward = 8,
  kOrbit = 9,
};

// Work is split into fixed-size chunks; chunk i always draws from
// substream(seed, tag, i), so results do not depend on the worker count.
inline constexpr std::size_t kChunkSize = 2048;

inline Engine substream(std::uint64_t seed, Stream tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Engine(seq);
}

inline double uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace ksd
