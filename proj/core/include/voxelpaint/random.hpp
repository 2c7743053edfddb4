#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace voxelpaint {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection, so the result does not depend on
/// the standard library's distribution implementation.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % n;
}

std::uint64_t splitmix64(std::uint64_t x);

/// Per-case seed: hash(global seed, case id). Independent of processing order.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key);

}  // namespace voxelpaint
