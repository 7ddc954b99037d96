#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace firecast {

// Portable helpers: std::shuffle and std::uniform_int_distribution are
// implementation-defined, so seeded artifacts would differ across standard libraries.

inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<int> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return p;
}

/// Derives an independent stream seed from a root seed and a tag (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace firecast
