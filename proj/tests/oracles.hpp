#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include "celllts/cellmcd.hpp"
#include "celllts/lts_ridge.hpp"

#include <limits>
#include <vector>

namespace celllts::oracle {

struct BruteCellMcd {
  double objective = std::numeric_limits<double>::infinity();
  BinaryMatrix W;
};

// Minimum of the penalised objective over every feasible W (column floor
// min(h, observed_j)), with (mu, Sigma) fitted to convergence for each W from
// several starts.
inline BruteCellMcd brute_force_cellmcd(const MaskedMatrix& x, const Vector& q, double eig_floor, Index h,
                                        bool fixed_center, const std::vector<std::pair<Vector, Matrix>>& starts) {
  const Index n = x.rows(), d = x.cols();
  const Index cells = n * d;
  BruteCellMcd best;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << cells); ++code) {
    BinaryMatrix w(n, d);
    for (Index c = 0; c < cells; ++c) w(c / d, c % d) = (code >> c) & 1U;
    // Unobserved cells carry no information; only enumerate W = 0 there once.
    bool canonical = true, feasible = true;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j)
        if (!x.is_observed(i, j) && w(i, j)) canonical = false;
    if (!canonical) continue;
    for (Index j = 0; j < d; ++j) {
      Index kept = 0;
      for (Index i = 0; i < n; ++i) kept += w(i, j);
      if (kept < std::min(h, x.observed_count(j))) feasible = false;
      if (kept == 0) feasible = false;
    }
    if (!feasible) continue;
    for (const auto& [mu0, s0] : starts) {
      const MuSigma ms = update_mu_sigma(x, w, mu0, s0, fixed_center, eig_floor, 20000, 0.0);
      const double obj = objective(x, w, ms.mu, ms.sigma, q);
      if (obj < best.objective) {
        best.objective = obj;
        best.W = w;
      }
    }
  }
  return best;
}

struct ExhaustiveLts {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<Index> subset;
  Vector beta;
};

// min over all h-subsets H of min_beta sum_H r^2 + lambda ||beta||^2, each inner
// problem solved in closed form through the normal equations.
inline ExhaustiveLts exhaustive_lts(const Matrix& x, const Vector& y, Index h, double lambda) {
  const Index n = x.rows(), d = x.cols();
  ExhaustiveLts best;
  std::vector<Index> idx(static_cast<std::size_t>(h));
  for (Index t = 0; t < h; ++t) idx[static_cast<std::size_t>(t)] = t;
  while (true) {
    Matrix g = lambda * Matrix::Identity(d, d);
    Vector b = Vector::Zero(d);
    for (Index i : idx) {
      g += x.row(i).transpose() * x.row(i);
      b += x.row(i).transpose() * y(i);
    }
    const Vector beta = g.ldlt().solve(b);
    double obj = lambda * beta.squaredNorm();
    for (Index i : idx) {
      const double r = y(i) - x.row(i).dot(beta);
      obj += r * r;
    }
    if (obj < best.objective) {
      best.objective = obj;
      best.subset = idx;
      best.beta = beta;
    }
    // next combination
    Index t = h - 1;
    while (t >= 0 && idx[static_cast<std::size_t>(t)] == n - h + t) --t;
    if (t < 0) break;
    ++idx[static_cast<std::size_t>(t)];
    for (Index u = t + 1; u < h; ++u) idx[static_cast<std::size_t>(u)] = idx[static_cast<std::size_t>(u - 1)] + 1;
  }
  return best;
}

// Observed-data MLE for two columns when column 0 is complete and column 1 is
// missing in some rows (monotone pattern): factor the likelihood into the
// marginal of column 0 and the regression of column 1 on column 0.
inline std::pair<Vector, Matrix> monotone_mle(const Matrix& v, const std::vector<bool>& col1_observed) {
  const Index n = v.rows();
  const double m0 = v.col(0).mean();
  const double s00 = (v.col(0).array() - m0).square().sum() / static_cast<double>(n);
  double a0 = 0, a1 = 0;
  Index c = 0;
  for (Index i = 0; i < n; ++i)
    if (col1_observed[static_cast<std::size_t>(i)]) {
      a0 += v(i, 0);
      a1 += v(i, 1);
      ++c;
    }
  a0 /= static_cast<double>(c);
  a1 /= static_cast<double>(c);
  double sxx = 0, sxy = 0;
  for (Index i = 0; i < n; ++i)
    if (col1_observed[static_cast<std::size_t>(i)]) {
      sxx += (v(i, 0) - a0) * (v(i, 0) - a0);
      sxy += (v(i, 0) - a0) * (v(i, 1) - a1);
    }
  const double slope = sxy / sxx;
  const double icpt = a1 - slope * a0;
  double rss = 0;
  for (Index i = 0; i < n; ++i)
    if (col1_observed[static_cast<std::size_t>(i)]) {
      const double r = v(i, 1) - icpt - slope * v(i, 0);
      rss += r * r;
    }
  const double s11_0 = rss / static_cast<double>(c);
  Vector mu(2);
  mu << m0, icpt + slope * m0;
  Matrix s(2, 2);
  s << s00, slope * s00, slope * s00, s11_0 + slope * slope * s00;
  return {mu, s};
}

}  // namespace celllts::oracle
