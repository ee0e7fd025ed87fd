#include "celllts/lts_ridge.hpp"

#include "celllts/seeding.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace celllts {

AugmentedData augment_ridge(const Matrix& x, const Vector& y, double lambda) {
  if (!(lambda > 0.0)) throw Error("augment_ridge: lambda must be positive");
  if (x.rows() != y.size()) throw Error("augment_ridge: row count mismatch");
  const Index n = x.rows(), d = x.cols();
  AugmentedData aug;
  aug.n_genuine = n;
  aug.x.resize(n + d, d);
  aug.y.resize(n + d);
  aug.x.topRows(n) = x;
  aug.y.head(n) = y;
  aug.x.bottomRows(d) = std::sqrt(lambda) * Matrix::Identity(d, d);
  aug.y.tail(d).setZero();
  for (Index j = 0; j < d; ++j) aug.fixed_set.push_back(n + j);
  return aug;
}

std::vector<Index> smallest_residuals(const Vector& r, Index h_sub) {
  const Index n = r.size();
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  auto less = [&](Index a, Index b) {
    const double ra = r(a) * r(a), rb = r(b) * r(b);
    return ra < rb || (ra == rb && a < b);
  };
  if (h_sub < n) {
    std::nth_element(idx.begin(), idx.begin() + h_sub, idx.end(), less);
    idx.resize(static_cast<std::size_t>(h_sub));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

Vector solve_gram(Matrix gram, const Vector& rhs) {
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw Error("lts_ridge: rank-deficient design on subset");
  return llt.solve(rhs);
}

// Least squares over `rows` plus the fixed rows of the augmented data.
Vector fit_subset(const AugmentedData& aug, std::span<const Index> rows) {
  const Index d = aug.x.cols();
  Matrix xs(static_cast<Index>(rows.size()) + d, d);
  Vector ys(xs.rows());
  Index r = 0;
  for (Index i : rows) {
    xs.row(r) = aug.x.row(i);
    ys(r++) = aug.y(i);
  }
  for (Index f : aug.fixed_set) {
    xs.row(r) = aug.x.row(f);
    ys(r++) = aug.y(f);
  }
  Matrix gram = Matrix::Zero(d, d);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  return solve_gram(std::move(gram), xs.transpose() * ys);
}

double fixed_part(const AugmentedData& aug, const Vector& beta) {
  double s = 0.0;
  for (Index f : aug.fixed_set) {
    const double r = aug.y(f) - aug.x.row(f).dot(beta);
    s += r * r;
  }
  return s;
}

struct Candidate {
  double objective;
  std::vector<Index> subset;
  Vector beta;
  Index start;
  int csteps;
};

}  // namespace

CStepResult cstep(const AugmentedData& aug, std::span<const Index> subset) {
  const Index n = aug.n_genuine;
  const auto h_sub = static_cast<Index>(subset.size());
  if (h_sub < 1 || h_sub > n) throw Error("cstep: subset size out of range");
  CStepResult out;
  out.beta = fit_subset(aug, subset);
  const Vector r = aug.y.head(n) - aug.x.topRows(n) * out.beta;
  out.next_subset = smallest_residuals(r, h_sub);
  double s = 0.0;
  for (Index i : out.next_subset) s += r(i) * r(i);
  out.objective = s + fixed_part(aug, out.beta);
  return out;
}

Vector ridge_solve(const Matrix& x, const Vector& y, double lambda, std::span<const Index> rows) {
  const Index d = x.cols();
  Matrix gram = lambda * Matrix::Identity(d, d);
  Vector rhs = Vector::Zero(d);
  if (rows.empty()) {
    gram.noalias() += x.transpose() * x;
    rhs.noalias() += x.transpose() * y;
  } else {
    Matrix xs(static_cast<Index>(rows.size()), d);
    Vector ys(xs.rows());
    Index r = 0;
    for (Index i : rows) {
      xs.row(r) = x.row(i);
      ys(r++) = y(i);
    }
    gram.noalias() += xs.transpose() * xs;
    rhs.noalias() += xs.transpose() * ys;
  }
  return solve_gram(std::move(gram), rhs);
}

double trimmed_objective(const Matrix& x, const Vector& y, const Vector& beta, Index h_sub,
                         double lambda, std::vector<Index>* subset) {
  const Vector r = y - x * beta;
  auto idx = smallest_residuals(r, h_sub);
  double s = 0.0;
  for (Index i : idx) s += r(i) * r(i);
  if (subset) *subset = std::move(idx);
  return s + lambda * beta.squaredNorm();
}

LtsFit fit_lts_ridge(const Matrix& x, const Vector& y, Index h_sub, const LtsOptions& opts) {
  const Index n = x.rows(), d = x.cols();
  if (y.size() != n) throw Error("fit_lts_ridge: row count mismatch");
  if (h_sub > n) throw Error("fit_lts_ridge: subset size exceeds number of rows");
  if (h_sub <= d) throw Error("fit_lts_ridge: subset size must exceed the dimension");
  if (opts.n_starts < 1) throw Error("fit_lts_ridge: need at least one start");
  const AugmentedData aug = augment_ridge(x, y, opts.lambda);

  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(opts.n_starts));
  std::vector<Index> elem(static_cast<std::size_t>(d + 1));
  for (int s = 0; s < opts.n_starts; ++s) {
    Rng rng = make_rng(opts.seed, {0x17a5ULL, static_cast<std::uint64_t>(s)});
    // Floyd's algorithm for d+1 distinct rows.
    std::unordered_set<Index> chosen;
    Index t = 0;
    for (Index j = n - (d + 1); j < n; ++j) {
      std::uniform_int_distribution<Index> pick(0, j);
      Index v = pick(rng);
      if (chosen.count(v)) v = j;
      chosen.insert(v);
      elem[static_cast<std::size_t>(t++)] = v;
    }
    std::sort(elem.begin(), elem.end());
    const Vector beta0 = fit_subset(aug, elem);
    const Vector r0 = y - x * beta0;
    Candidate c{0.0, smallest_residuals(r0, h_sub), beta0, s, 0};
    for (int w = 0; w < opts.warm_csteps; ++w) {
      CStepResult cs = cstep(aug, c.subset);
      c.subset = std::move(cs.next_subset);
      c.beta = std::move(cs.beta);
      c.objective = cs.objective;
      ++c.csteps;
    }
    if (opts.warm_csteps == 0) {
      c.objective = trimmed_objective(x, y, beta0, h_sub, opts.lambda);
    }
    cands.push_back(std::move(c));
  }

  auto better = [](const Candidate& a, const Candidate& b) {
    return a.objective < b.objective || (a.objective == b.objective && a.start < b.start);
  };
  const auto n_fin = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opts.n_finalists)),
                                           cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n_fin), cands.end(),
                    better);
  cands.resize(n_fin);

  for (auto& c : cands) {
    for (int it = 0; it < opts.max_csteps; ++it) {
      CStepResult cs = cstep(aug, c.subset);
      ++c.csteps;
      const bool same = cs.next_subset == c.subset;
      const bool no_gain = !(cs.objective < c.objective);
      c.beta = std::move(cs.beta);
      c.subset = std::move(cs.next_subset);
      c.objective = cs.objective;
      if (same || no_gain) break;
    }
  }
  const Candidate& best = *std::min_element(cands.begin(), cands.end(), better);

  LtsFit fit;
  fit.beta_std = best.beta;
  fit.n_csteps = best.csteps;
  fit.objective = trimmed_objective(x, y, fit.beta_std, h_sub, opts.lambda, &fit.active_set);
  double ss = 0.0;
  const Vector r = y - x * fit.beta_std;
  for (Index i : fit.active_set) ss += r(i) * r(i);
  fit.scale_resid = std::sqrt(ss / static_cast<double>(h_sub)) *
                    mcd_consistency_factor(static_cast<double>(h_sub) / static_cast<double>(n));
  return fit;
}

ReweightResult reweighted_fit(const Matrix& pair_x, const Vector& pair_y,
                              const std::vector<std::pair<Index, Index>>& pair_index,
                              const Matrix& case_x, const Vector& case_y, const Vector& beta_raw,
                              Index h_case, double lambda, double cutoff) {
  const Index n = case_x.rows(), d = case_x.cols();
  ReweightResult out;
  const Vector pseudo = case_y - case_x * beta_raw;
  const UniMcdResult mcd = unimcd(std::span<const double>(pseudo.data(), static_cast<std::size_t>(n)),
                                  std::min(h_case, n));
  out.location = mcd.location;
  out.scale = mcd.scale;
  out.case_residuals = pseudo.array() - mcd.location;
  out.case_weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.case_weights(i) = std::abs(out.case_residuals(i)) <= cutoff * mcd.scale ? 1 : 0;
  }
  std::vector<Index> rows;
  for (std::size_t r = 0; r < pair_index.size(); ++r) {
    const auto [a, b] = pair_index[r];
    if (out.case_weights(a) && out.case_weights(b)) rows.push_back(static_cast<Index>(r));
  }
  out.pairs_used = static_cast<Index>(rows.size());
  if (out.pairs_used < d + 1) throw Error("reweighted_fit: fewer than d+1 pairs survive reweighting");
  out.beta = ridge_solve(pair_x, pair_y, lambda, rows);
  return out;
}

}  // namespace celllts
