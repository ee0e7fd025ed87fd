#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace celllts {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (base, tag...). Streams for different tags do
// not depend on the order in which they are created.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(base, tags));
}

}  // namespace celllts
