#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vidfeat {

// Derives an independent stream seed from a master seed and a purpose tag.
// FNV-1a over the tag, then a 64-bit finalizer so nearby seeds decorrelate.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ull ^ (seed * 0x9e3779b97f4a7c15ull);
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view tag) {
  return std::mt19937_64(derive_seed(seed, tag));
}

}  // namespace vidfeat
