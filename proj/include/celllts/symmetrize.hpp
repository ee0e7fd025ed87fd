#pragma once

#include "celllts/numeric_core.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace celllts {

struct SymScheme {
  enum class Kind { Full, KPerm };
  Kind kind = Kind::KPerm;
  int k = 20;
  std::uint64_t seed = 0;

  static SymScheme full() { return {Kind::Full, 0, 0}; }
  static SymScheme kperm(int k, std::uint64_t seed) { return {Kind::KPerm, k, seed}; }
};

// Pairwise differences x_second - x_first, stored once per pair (half-set
// convention). Missing propagates: a difference cell is missing iff either
// constituent is.
struct PairSet {
  MaskedMatrix rows;
  std::vector<std::pair<Index, Index>> pair_index;  // (first, second)
  SymScheme scheme;

  Index size() const { return static_cast<Index>(pair_index.size()); }
};

// Difference of two cells with missing propagation (NaN = missing).
inline double missing_propagate(double second, double first) {
  return (is_missing(second) || is_missing(first)) ? kMissing : second - first;
}

// Index pairs only. Full: all i < l in lexicographic order. KPerm: for each
// of k seed-derived permutations, the n cyclic neighbours.
std::vector<std::pair<Index, Index>> pair_indices(Index n, const SymScheme& scheme);

PairSet symmetrize(const MaskedMatrix& x, const SymScheme& scheme);
PairSet sym_full(const MaskedMatrix& x);
PairSet sym_kperm(const MaskedMatrix& x, int k, std::uint64_t seed);

// Differences of a vector over given pairs (NaN propagates).
Vector sym_vector(const Vector& y, const std::vector<std::pair<Index, Index>>& pairs);

// Pair-scale subset size: h(h-1)/2 for the full half-set, otherwise the same
// fraction h(h-1)/(n(n-1)) of the pair count, rounded up.
Index pair_subset_size(Index n, Index h, const SymScheme& scheme);

}  // namespace celllts
