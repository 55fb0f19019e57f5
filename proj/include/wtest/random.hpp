#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wtest {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from a base
/// seed and a stream index so parallel work is reproducible regardless of
/// scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// FNV-1a, for tagging named sub-streams and digests.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
  return derive_seed(seed, fnv1a(tag));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  return Rng(derive_seed(seed, index));
}

inline Rng make_stream(std::uint64_t seed, std::string_view tag) {
  return Rng(derive_seed(seed, tag));
}

}  // namespace wtest
