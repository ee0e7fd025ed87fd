#include "celllts/cellmcd.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <string>

namespace celllts {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

BinaryVector row_of(const BinaryMatrix& w, Index i) { return w.row(i).transpose(); }

// Gathered precision block and factorisation for the free cells of a row.
struct FreeBlock {
  std::vector<Index> idx;
  Eigen::LLT<Matrix> llt;
  Vector g_free;  // (P e)_free
  Vector z;       // P_ff^{-1} (P e)_free
  double md2 = 0.0;
  double log_det_pff = 0.0;
};

}  // namespace

GaussianConditioner::GaussianConditioner(Vector mu, Matrix sigma)
    : mu_(std::move(mu)), sigma_(std::move(sigma)) {
  if (sigma_.rows() != mu_.size() || sigma_.cols() != mu_.size()) {
    throw Error("GaussianConditioner: dimension mismatch between mu and sigma");
  }
  Eigen::LLT<Matrix> llt(sigma_);
  if (llt.info() != Eigen::Success) {
    throw Error("GaussianConditioner: covariance matrix is not positive definite");
  }
  const auto& l = llt.matrixL();
  log_det_ = 0.0;
  for (Index k = 0; k < sigma_.rows(); ++k) log_det_ += 2.0 * std::log(l(k, k));
  const Matrix inv = llt.solve(Matrix::Identity(mu_.size(), mu_.size()));
  precision_ = 0.5 * (inv + inv.transpose());
}

namespace {

FreeBlock free_block(const Vector& x, const BinaryVector& keep, const Vector& mu,
                     const Matrix& precision) {
  const Index d = mu.size();
  Vector e = Vector::Zero(d);
  FreeBlock fb;
  fb.idx.reserve(static_cast<std::size_t>(d));
  for (Index t = 0; t < d; ++t) {
    if (keep(t))
      e(t) = x(t) - mu(t);
    else
      fb.idx.push_back(t);
  }
  const Vector g = precision * e;
  fb.md2 = e.dot(g);
  const auto u = static_cast<Index>(fb.idx.size());
  if (u == 0) return fb;
  Matrix pff(u, u);
  fb.g_free.resize(u);
  for (Index a = 0; a < u; ++a) {
    fb.g_free(a) = g(fb.idx[a]);
    for (Index b = 0; b < u; ++b) pff(a, b) = precision(fb.idx[a], fb.idx[b]);
  }
  fb.llt.compute(pff);
  if (fb.llt.info() != Eigen::Success) {
    throw Error("cellmcd: singular conditioning submatrix");
  }
  fb.z = fb.llt.solve(fb.g_free);
  fb.md2 -= fb.g_free.dot(fb.z);
  const auto& l = fb.llt.matrixL();
  for (Index a = 0; a < u; ++a) fb.log_det_pff += 2.0 * std::log(l(a, a));
  return fb;
}

}  // namespace

GaussianConditioner::Conditional GaussianConditioner::conditional(const Vector& x,
                                                                  const BinaryVector& keep) const {
  const Index d = dim();
  FreeBlock fb = free_block(x, keep, mu_, precision_);
  Conditional c;
  const auto u = static_cast<Index>(fb.idx.size());
  const auto kept = static_cast<double>(d - u);
  c.free_idx = std::move(fb.idx);
  if (u == d) {
    c.mean = mu_;
    c.cov = sigma_;
    c.neg2_loglik = 0.0;
    return c;
  }
  c.neg2_loglik = log_det_ + fb.log_det_pff + kept * kLog2Pi + fb.md2;
  if (u == 0) return c;
  c.mean.resize(u);
  for (Index a = 0; a < u; ++a) c.mean(a) = mu_(c.free_idx[a]) - fb.z(a);
  c.cov = fb.llt.solve(Matrix::Identity(u, u));
  return c;
}

double GaussianConditioner::row_neg2_loglik(const Vector& x, const BinaryVector& keep) const {
  const Index kept = keep.cast<Index>().sum();
  if (kept == 0) return 0.0;
  FreeBlock fb = free_block(x, keep, mu_, precision_);
  return log_det_ + fb.log_det_pff + static_cast<double>(kept) * kLog2Pi + fb.md2;
}

void GaussianConditioner::cell_conditional(const Vector& x, BinaryVector keep, Index j,
                                           double& mean, double& var) const {
  keep(j) = 0;
  FreeBlock fb = free_block(x, keep, mu_, precision_);
  const auto pos = static_cast<Index>(std::find(fb.idx.begin(), fb.idx.end(), j) - fb.idx.begin());
  mean = mu_(j) - fb.z(pos);
  Vector unit = Vector::Zero(static_cast<Index>(fb.idx.size()));
  unit(pos) = 1.0;
  var = fb.llt.solve(unit)(pos);
}

double GaussianConditioner::cell_deviance(const Vector& x, BinaryVector keep, Index j) const {
  double mean = 0.0, var = 0.0;
  cell_conditional(x, std::move(keep), j, mean, var);
  const double r = x(j) - mean;
  return kLog2Pi + std::log(var) + r * r / var;
}

double objective(const MaskedMatrix& x, const BinaryMatrix& W, const Vector& mu,
                 const Matrix& sigma, const Vector& q) {
  const Index n = x.rows(), d = x.cols();
  if (W.rows() != n || W.cols() != d || q.size() != d) {
    throw Error("objective: shape mismatch");
  }
  const GaussianConditioner g(mu, sigma);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    BinaryVector keep = row_of(W, i) * x.observed.row(i).transpose();
    const Vector row = x.row(i);
    total += g.row_neg2_loglik(row, keep);
  }
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (x.is_observed(i, j) && W(i, j) == 0) total += q(j);
    }
  }
  return total;
}

BinaryMatrix update_W(const MaskedMatrix& x, const BinaryMatrix& W, const Vector& mu,
                      const Matrix& sigma, const Vector& q, Index h) {
  const Index n = x.rows(), d = x.cols();
  const GaussianConditioner g(mu, sigma);
  BinaryMatrix out = W * x.observed;
  const Matrix xt = x.values.transpose();

  std::vector<double> dev(static_cast<std::size_t>(n));
  std::vector<Index> dropped;
  for (Index j = 0; j < d; ++j) {
    const Index floor_j = std::min(h, x.observed_count(j));
    Index kept = 0;
    dropped.clear();
    for (Index i = 0; i < n; ++i) {
      if (!x.is_observed(i, j)) continue;
      const Vector row = xt.col(i);
      const double dv = g.cell_deviance(row, row_of(out, i), j);
      dev[static_cast<std::size_t>(i)] = dv;
      std::uint8_t keep_cell = out(i, j);
      if (dv < q(j))
        keep_cell = 1;
      else if (dv > q(j))
        keep_cell = 0;
      out(i, j) = keep_cell;
      if (keep_cell)
        ++kept;
      else
        dropped.push_back(i);
    }
    if (kept < floor_j) {
      std::sort(dropped.begin(), dropped.end(), [&](Index a, Index b) {
        const double da = dev[static_cast<std::size_t>(a)], db = dev[static_cast<std::size_t>(b)];
        return da < db || (da == db && a < b);
      });
      for (Index t = 0; t < floor_j - kept; ++t) out(dropped[static_cast<std::size_t>(t)], j) = 1;
    }
  }
  return out;
}

MuSigma update_mu_sigma(const MaskedMatrix& x, const BinaryMatrix& W, const Vector& mu_start,
                        const Matrix& sigma_start, bool fixed_center, double eig_floor,
                        int max_sweeps, double tol) {
  const Index n = x.rows(), d = x.cols();
  const BinaryMatrix keep_all = W * x.observed;
  for (Index j = 0; j < d; ++j) {
    if (keep_all.col(j).cast<Index>().sum() == 0) {
      const std::string name =
          x.column_names.empty() ? std::to_string(j) : x.column_names[static_cast<std::size_t>(j)];
      throw Error("cellmcd: column " + name + " has no observed unflagged cells");
    }
  }
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i)
    if (keep_all.row(i).cast<Index>().sum() > 0) rows.push_back(i);
  const auto n_eff = static_cast<Index>(rows.size());
  const double kept_cells = static_cast<double>(keep_all.cast<Index>().sum());
  const Matrix xt = x.values.transpose();

  MuSigma out{mu_start, sigma_start, 0};
  double prev = std::numeric_limits<double>::infinity();
  Matrix y(n_eff, d);
  for (int sweep = 0;; ++sweep) {
    const GaussianConditioner g(out.mu, out.sigma);
    Matrix csum = Matrix::Zero(d, d);
    double neg2 = 0.0;
    for (Index r = 0; r < n_eff; ++r) {
      const Index i = rows[static_cast<std::size_t>(r)];
      const Vector row = xt.col(i);
      const BinaryVector keep = keep_all.row(i).transpose();
      auto c = g.conditional(row, keep);
      neg2 += c.neg2_loglik;
      Vector filled = row;
      for (std::size_t a = 0; a < c.free_idx.size(); ++a) {
        const Index fa = c.free_idx[a];
        filled(fa) = c.mean(static_cast<Index>(a));
        for (std::size_t b = 0; b < c.free_idx.size(); ++b)
          csum(fa, c.free_idx[b]) += c.cov(static_cast<Index>(a), static_cast<Index>(b));
      }
      y.row(r) = (filled - out.mu).transpose();
    }
    if (sweep > 0 && prev - neg2 <= tol * kept_cells) break;
    prev = neg2;
    if (sweep == max_sweeps) break;

    Matrix s = (y.transpose() * y + csum) / static_cast<double>(n_eff);
    if (!fixed_center) {
      const Vector shift = y.colwise().mean().transpose();
      out.mu += shift;
      s -= shift * shift.transpose();
    }
    out.sigma = floor_eigenvalues(s, eig_floor);
    ++out.sweeps;
  }
  return out;
}

Vector calibrate_penalties(const Matrix& sigma, double quantile) {
  const double base = chi2_quantile(quantile, 1.0);
  Vector q(sigma.rows());
  for (Index j = 0; j < sigma.rows(); ++j) q(j) = base + kLog2Pi + std::log(sigma(j, j));
  return q;
}

CellMcdStart initialize(const MaskedMatrix& x, const CellMcdOptions& opts) {
  const Index n = x.rows(), d = x.cols();
  if (n < 2 || d < 1) throw Error("cellmcd: need at least 2 rows and 1 column");
  CellMcdStart st;
  st.h = opts.h > 0 ? std::min(opts.h, n) : (3 * n + 3) / 4;

  if (opts.scales.size() != 0 && opts.scales.size() != d) throw Error("cellmcd: scales length mismatch");
  Vector loc(d), scale(d);
  for (Index j = 0; j < d; ++j) {
    const auto col = x.values.col(j);
    UniMcdResult r =
        unimcd_reweighted(std::span<const double>(col.data(), static_cast<std::size_t>(n)), st.h);
    if (opts.scales.size() == d) r.scale = opts.scales(j);
    if (!(r.scale > 0.0)) {
      const std::string name =
          x.column_names.empty() ? std::to_string(j) : x.column_names[static_cast<std::size_t>(j)];
      throw Error("cellmcd: column " + name + " is degenerate (zero robust scale)");
    }
    loc(j) = r.location;
    scale(j) = r.scale;
  }
  st.scales = scale;
  if (opts.fixed_center) {
    st.mu = opts.center.size() == d ? opts.center : Vector::Zero(d);
  } else {
    st.mu = loc;
  }

  std::vector<double> vars(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) vars[static_cast<std::size_t>(j)] = scale(j) * scale(j);
  st.eig_floor = opts.eig_floor > 0.0 ? opts.eig_floor : 1e-3 * median(vars);

  const Matrix z = robust_zscores(x, st.mu, scale);
  st.W = marginal_flag(z, flag_cutoff(opts.flag_quantile));

  // Rank correlations from the marginally clean cells only.
  MaskedMatrix clean = x;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < n; ++i)
      if (!st.W(i, j)) clean.set_missing(i, j);
  const Matrix r = gaussian_rank_correlation(clean);
  st.sigma = floor_eigenvalues(scale.asDiagonal() * r * scale.asDiagonal(), st.eig_floor);
  st.q = opts.q.size() == d ? opts.q : calibrate_penalties(st.sigma, opts.flag_quantile);
  for (Index j = 0; j < d; ++j) {
    const Index floor_j = std::min(st.h, x.observed_count(j));
    Index kept = st.W.col(j).cast<Index>().sum();
    if (kept >= floor_j) continue;
    std::vector<Index> cand;
    for (Index i = 0; i < n; ++i)
      if (x.is_observed(i, j) && st.W(i, j) == 0) cand.push_back(i);
    std::sort(cand.begin(), cand.end(), [&](Index a, Index b) {
      const double za = std::abs(z(a, j)), zb = std::abs(z(b, j));
      return za < zb || (za == zb && a < b);
    });
    for (Index t = 0; kept < floor_j; ++t, ++kept) st.W(cand[static_cast<std::size_t>(t)], j) = 1;
  }
  return st;
}

CellMcdModel fit_cellmcd(const MaskedMatrix& x, const CellMcdOptions& opts) {
  x.check_invariants();
  CellMcdStart st = initialize(x, opts);
  const double cells = std::max(1.0, static_cast<double>(x.observed.cast<Index>().sum()));

  CellMcdModel m;
  m.q = st.q;
  m.h = st.h;
  m.eig_floor = st.eig_floor;
  m.fixed_center = opts.fixed_center;
  m.W = st.W;

  MuSigma ms = update_mu_sigma(x, m.W, st.mu, st.sigma, opts.fixed_center, m.eig_floor,
                               opts.em_max_sweeps, opts.em_tol);
  double obj = objective(x, m.W, ms.mu, ms.sigma, m.q);
  m.objective_trace.push_back(obj);
  for (int it = 0; it < opts.max_iter; ++it) {
    BinaryMatrix w_next = update_W(x, m.W, ms.mu, ms.sigma, m.q, m.h);
    ms = update_mu_sigma(x, w_next, ms.mu, ms.sigma, opts.fixed_center, m.eig_floor,
                         opts.em_max_sweeps, opts.em_tol);
    const double next = objective(x, w_next, ms.mu, ms.sigma, m.q);
    m.objective_trace.push_back(next);
    m.W = std::move(w_next);
    const double change = obj - next;
    obj = next;
    if (std::abs(change) <= opts.tol * cells) break;
  }
  m.mu = std::move(ms.mu);
  m.sigma = std::move(ms.sigma);
  return m;
}

Vector impute_row(const Vector& x, const BinaryVector& w_row, const GaussianConditioner& g) {
  const Index d = g.dim();
  if (x.size() != d || w_row.size() != d) throw Error("impute_row: dimension mismatch");
  BinaryVector keep(d);
  for (Index j = 0; j < d; ++j) keep(j) = (w_row(j) && !is_missing(x(j))) ? 1 : 0;
  Vector out = x;
  if (keep.cast<Index>().sum() == d) return out;
  const auto c = g.conditional(x, keep);
  for (std::size_t a = 0; a < c.free_idx.size(); ++a) out(c.free_idx[a]) = c.mean(static_cast<Index>(a));
  return out;
}

Vector impute_row(const Vector& x, const BinaryVector& w_row, const Vector& mu,
                  const Matrix& sigma) {
  return impute_row(x, w_row, GaussianConditioner(mu, sigma));
}

BinaryVector flag_row(const Vector& x, const GaussianConditioner& g, const Vector& q,
                      double cutoff) {
  const Index d = g.dim();
  if (x.size() != d || q.size() != d) throw Error("flag_row: dimension mismatch");
  BinaryVector w(d);
  for (Index j = 0; j < d; ++j) {
    if (is_missing(x(j))) {
      w(j) = 0;
      continue;
    }
    const double z = (x(j) - g.mu()(j)) / std::sqrt(g.sigma()(j, j));
    w(j) = std::abs(z) > cutoff ? 0 : 1;
  }
  // Every accepted flip strictly lowers the row objective, so this terminates;
  // the sweep cap only guards against floating-point cycling.
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool changed = false;
    for (Index j = 0; j < d; ++j) {
      if (is_missing(x(j))) continue;
      const double dv = g.cell_deviance(x, w, j);
      if (w(j) && dv > q(j)) {
        w(j) = 0;
        changed = true;
      } else if (!w(j) && dv < q(j)) {
        w(j) = 1;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return w;
}

BinaryVector flag_row(const Vector& x, const Vector& mu, const Matrix& sigma, const Vector& q,
                      double cutoff) {
  return flag_row(x, GaussianConditioner(mu, sigma), q, cutoff);
}

}  // namespace celllts
