#pragma once

// Random streams and seed derivation.
//
// Every random stream is a std::mt19937_64 seeded with a 64-bit value.
// Child seeds are derived as splitmix64(master ^ splitmix64(index + 1)), so a
// sample's stream depends only on (master_seed, sample_index) and never on
// the order in which workers reach it.

#include <cstdint>
#include <random>
#include <string_view>

namespace qsklab {

using Stream = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

inline Stream make_stream(std::uint64_t seed) { return Stream(seed); }

/// FNV-1a, used for content hashes of coupling samples.
inline constexpr std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace qsklab
