#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pulseprep {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Per-stage seed: splitmix64(global ^ fnv1a64(stage)). Stages used by the tools are
// "data", "init", "shuffle", "rg" and "crab".
inline std::uint64_t derive_seed(std::uint64_t global, std::string_view stage) {
  return splitmix64(global ^ fnv1a64(stage));
}

// Substream for the i-th shard or task under a base seed.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base + splitmix64(index + 1));
}

}  // namespace pulseprep
