#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metaopt {

// FNV-1a over the purpose label; stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// One round of splitmix64; used to decorrelate master seed and label hash.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic sub-seed for (master, purpose). Distinct purposes yield
// independent streams; identical inputs always yield the same stream.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::string_view purpose) {
  return splitmix64(splitmix64(master) ^ fnv1a64(purpose));
}

inline std::mt19937_64 seed_stream(std::uint64_t master,
                                   std::string_view purpose) {
  return std::mt19937_64(derive_seed(master, purpose));
}

}  // namespace metaopt
