#pragma once

#include <cstdint>

namespace imcf {

// Independent streams derived from the single scenario seed.
enum class SeedStream : std::uint64_t { Shape = 1, Eigensolver = 2, PLaplace = 3, Oracle = 4 };

// splitmix64 finalizer applied to (seed, stream, counter).
inline std::uint64_t split_seed(std::uint64_t seed, SeedStream stream, std::uint64_t counter = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(stream) * 0x100000001ull + counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace imcf
