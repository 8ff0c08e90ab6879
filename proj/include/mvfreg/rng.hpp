#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mvfreg {

using Rng = std::mt19937_64;

/// Independent generator for a (seed, tag, index) triple. Tags separate the
/// random streams of one run (curves, noise, fold split, ...) so that changing
/// how one stream is consumed never perturbs the others.
inline Rng make_stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t kCurves = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kMixing = 3;
inline constexpr std::uint64_t kSnr = 4;
inline constexpr std::uint64_t kFolds = 5;
inline constexpr std::uint64_t kBootstrap = 6;
inline constexpr std::uint64_t kReplicate = 7;
inline constexpr std::uint64_t kTestCurves = 8;
inline constexpr std::uint64_t kTestNoise = 9;
}  // namespace stream

}  // namespace mvfreg
