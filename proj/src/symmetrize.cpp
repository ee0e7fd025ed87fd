#include "celllts/symmetrize.hpp"

#include "celllts/seeding.hpp"

#include <algorithm>
#include <numeric>

namespace celllts {

std::vector<std::pair<Index, Index>> pair_indices(Index n, const SymScheme& scheme) {
  if (n < 2) throw Error("symmetrize: need at least 2 cases");
  std::vector<std::pair<Index, Index>> out;
  if (scheme.kind == SymScheme::Kind::Full) {
    out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i)
      for (Index l = i + 1; l < n; ++l) out.emplace_back(i, l);
    return out;
  }
  if (scheme.k < 1) throw Error("symmetrize: k must be at least 1");
  out.reserve(static_cast<std::size_t>(n * scheme.k));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (int p = 0; p < scheme.k; ++p) {
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng = make_rng(scheme.seed, {0x5e11ULL, static_cast<std::uint64_t>(p)});
    for (Index i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<Index> pick(0, i);
      std::swap(perm[i], perm[pick(rng)]);
    }
    for (Index i = 0; i < n; ++i) out.emplace_back(perm[i], perm[(i + 1) % n]);
  }
  return out;
}

PairSet symmetrize(const MaskedMatrix& x, const SymScheme& scheme) {
  PairSet ps;
  ps.scheme = scheme;
  ps.pair_index = pair_indices(x.rows(), scheme);
  const auto m = static_cast<Index>(ps.pair_index.size());
  Matrix diff(m, x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const auto col = x.values.col(j);
    for (Index r = 0; r < m; ++r) {
      const auto [a, b] = ps.pair_index[static_cast<std::size_t>(r)];
      diff(r, j) = missing_propagate(col(b), col(a));
    }
  }
  ps.rows = MaskedMatrix::from_nan(std::move(diff), x.column_names);
  return ps;
}

PairSet sym_full(const MaskedMatrix& x) { return symmetrize(x, SymScheme::full()); }

PairSet sym_kperm(const MaskedMatrix& x, int k, std::uint64_t seed) {
  return symmetrize(x, SymScheme::kperm(k, seed));
}

Vector sym_vector(const Vector& y, const std::vector<std::pair<Index, Index>>& pairs) {
  Vector out(static_cast<Index>(pairs.size()));
  for (std::size_t r = 0; r < pairs.size(); ++r)
    out(static_cast<Index>(r)) = missing_propagate(y(pairs[r].second), y(pairs[r].first));
  return out;
}

Index pair_subset_size(Index n, Index h, const SymScheme& scheme) {
  if (n < 2 || h < 1 || h > n) throw Error("pair_subset_size: need 1 <= h <= n and n >= 2");
  if (scheme.kind == SymScheme::Kind::Full) return std::max<Index>(1, h * (h - 1) / 2);
  const Index total = n * scheme.k;
  const Index num = h * (h - 1) * total;
  const Index den = n * (n - 1);
  return std::clamp<Index>((num + den - 1) / den, 1, total);
}

}  // namespace celllts
