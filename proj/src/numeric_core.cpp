#include "celllts/numeric_core.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <numeric>

namespace celllts {

MaskedMatrix MaskedMatrix::from_nan(Matrix values, std::vector<std::string> names) {
  MaskedMatrix m;
  m.observed = values.array().isNaN().select(BinaryMatrix::Zero(values.rows(), values.cols()),
                                             BinaryMatrix::Ones(values.rows(), values.cols()));
  m.values = std::move(values);
  m.column_names = std::move(names);
  m.check_invariants();
  return m;
}

MaskedMatrix MaskedMatrix::from_dense(const Matrix& values, std::vector<std::string> names) {
  if (values.array().isNaN().any()) {
    throw Error("from_dense: input contains NaN; use from_nan for data with missing cells");
  }
  return from_nan(values, std::move(names));
}

void MaskedMatrix::set_missing(Index i, Index j) {
  values(i, j) = kMissing;
  observed(i, j) = 0;
}

void MaskedMatrix::set_value(Index i, Index j, double v) {
  if (is_missing(v)) {
    set_missing(i, j);
    return;
  }
  values(i, j) = v;
  observed(i, j) = 1;
}

Index MaskedMatrix::observed_count(Index j) const {
  return observed.col(j).cast<Index>().sum();
}

void MaskedMatrix::check_invariants() const {
  if (observed.rows() != values.rows() || observed.cols() != values.cols()) {
    throw Error("MaskedMatrix: mask and values have different shapes");
  }
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != values.cols()) {
    throw Error("MaskedMatrix: column_names size does not match column count");
  }
}

double chi2_quantile(double p, double df) {
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::quantile(dist, p);
}

double chi2_cdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(dist, x);
}

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

double flag_cutoff(double quantile) { return std::sqrt(chi2_quantile(quantile, 1.0)); }

double mcd_consistency_factor(double alpha) {
  if (!(alpha > 0.0)) throw Error("mcd_consistency_factor: alpha must be positive");
  if (alpha >= 1.0) return 1.0;
  const double q = chi2_quantile(alpha, 1.0);
  return std::sqrt(alpha / chi2_cdf(q, 3.0));
}

UniMcdResult unimcd(std::span<const double> v, Index h_sub) {
  const auto m = static_cast<Index>(v.size());
  if (m == 0) throw Error("unimcd: empty input");
  if (h_sub < 1 || h_sub > m) throw Error("unimcd: subset size out of range");

  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());

  // Partial sums anchored at the median position. A window that covers the
  // anchor only ever touches its own values, so far-away outliers cannot
  // cancel against it.
  const Index k = m / 2;
  const double c = s[k];
  std::vector<double> a1(m + 1, 0.0), a2(m + 1, 0.0);
  for (Index i = k + 1; i <= m; ++i) {
    const double e = s[i - 1] - c;
    a1[i] = a1[i - 1] + e;
    a2[i] = a2[i - 1] + e * e;
  }
  for (Index i = k - 1; i >= 0; --i) {
    const double e = s[i] - c;
    a1[i] = a1[i + 1] - e;
    a2[i] = a2[i + 1] - e * e;
  }

  Index best = 0;
  double best_ss = std::numeric_limits<double>::infinity();
  const double hd = static_cast<double>(h_sub);
  for (Index start = 0; start + h_sub <= m; ++start) {
    const double s1 = a1[start + h_sub] - a1[start];
    const double s2 = a2[start + h_sub] - a2[start];
    const double ss = s2 - s1 * s1 / hd;
    if (ss < best_ss) {
      best_ss = ss;
      best = start;
    }
  }

  UniMcdResult out;
  out.subset_start = best;
  const double* w = s.data() + best;
  if (w[0] == w[h_sub - 1]) {
    out.location = w[0];
    return out;
  }
  double mean = std::accumulate(w, w + h_sub, 0.0) / hd;
  double corr = 0.0, ss = 0.0;
  for (Index i = 0; i < h_sub; ++i) corr += w[i] - mean;
  mean += corr / hd;
  for (Index i = 0; i < h_sub; ++i) ss += (w[i] - mean) * (w[i] - mean);
  out.location = std::clamp(mean, w[0], w[h_sub - 1]);
  out.raw_scale = h_sub > 1 ? std::sqrt(ss / (hd - 1.0)) : 0.0;
  out.scale = out.raw_scale * mcd_consistency_factor(hd / static_cast<double>(m));
  return out;
}

UniMcdResult unimcd_observed(std::span<const double> v, Index h_sub) {
  std::vector<double> obs;
  obs.reserve(v.size());
  for (double x : v)
    if (!is_missing(x)) obs.push_back(x);
  if (obs.empty()) throw Error("unimcd: no observed values");
  return unimcd(obs, std::min<Index>(h_sub, static_cast<Index>(obs.size())));
}

UniMcdResult unimcd_reweighted(std::span<const double> v, Index h_sub, double quantile, int max_steps) {
  std::vector<double> obs;
  obs.reserve(v.size());
  for (double x : v)
    if (!is_missing(x)) obs.push_back(x);
  if (obs.empty()) throw Error("unimcd: no observed values");
  UniMcdResult r = unimcd(obs, std::min<Index>(h_sub, static_cast<Index>(obs.size())));
  if (!(r.scale > 0.0)) return r;
  const double raw_scale = r.scale;

  const double cut = std::sqrt(chi2_quantile(quantile, 1.0));
  const double factor = std::sqrt(quantile / chi2_cdf(cut * cut, 3.0));
  std::vector<char> keep(obs.size(), 0), prev;
  for (int step = 0; step < max_steps; ++step) {
    for (std::size_t i = 0; i < obs.size(); ++i) keep[i] = std::abs(obs[i] - r.location) <= cut * r.scale;
    if (keep == prev) break;
    double s1 = 0.0, m = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (keep[i]) {
        s1 += obs[i];
        m += 1.0;
      }
    if (m < 2.0) break;
    const double mean = s1 / m;
    double ss = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (keep[i]) ss += (obs[i] - mean) * (obs[i] - mean);
    // Never wider than the raw fit: reweighting may only tighten.
    const double sd = std::min(std::sqrt(ss / (m - 1.0)) * factor, raw_scale);
    if (!(sd > 0.0)) break;
    r.location = mean;
    r.scale = sd;
    prev = keep;
  }
  return r;
}

Matrix robust_zscores(const MaskedMatrix& x, const Vector& centers, const Vector& scales) {
  if (centers.size() != x.cols() || scales.size() != x.cols()) {
    throw Error("robust_zscores: centers/scales length does not match column count");
  }
  if ((scales.array() <= 0.0).any() || scales.array().isNaN().any()) {
    throw Error("robust_zscores: scales must be strictly positive");
  }
  Matrix z(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      z(i, j) = x.is_observed(i, j) ? (x.values(i, j) - centers(j)) / scales(j) : kMissing;
    }
  }
  return z;
}

BinaryMatrix marginal_flag(const Matrix& z, double cutoff) {
  if (!(cutoff > 0.0)) throw Error("marginal_flag: cutoff must be positive");
  BinaryMatrix w(z.rows(), z.cols());
  for (Index j = 0; j < z.cols(); ++j) {
    for (Index i = 0; i < z.rows(); ++i) {
      const double v = z(i, j);
      w(i, j) = (is_missing(v) || std::abs(v) > cutoff) ? 0 : 1;
    }
  }
  return w;
}

namespace {

// Normal scores of average ranks of `vals`.
std::vector<double> normal_scores(const std::vector<double>& vals) {
  const auto m = vals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
  std::vector<double> scores(m);
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && vals[order[j + 1]] == vals[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double sc = normal_quantile(rank / (static_cast<double>(m) + 1.0));
    for (std::size_t t = i; t <= j; ++t) scores[order[t]] = sc;
    i = j + 1;
  }
  return scores;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto m = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / m;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / m;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

Matrix gaussian_rank_correlation(const MaskedMatrix& x) {
  const Index n = x.rows(), d = x.cols();
  Matrix r = Matrix::Identity(d, d);

  std::vector<bool> complete(d);
  std::vector<std::vector<double>> full_scores(d);
  for (Index j = 0; j < d; ++j) {
    complete[j] = x.observed_count(j) == n;
    if (complete[j]) {
      std::vector<double> col(x.values.col(j).data(), x.values.col(j).data() + n);
      full_scores[j] = normal_scores(col);
    }
  }

  for (Index j = 0; j < d; ++j) {
    for (Index k = j + 1; k < d; ++k) {
      double rho = 0.0;
      if (complete[j] && complete[k]) {
        rho = pearson(full_scores[j], full_scores[k]);
      } else {
        std::vector<double> a, b;
        for (Index i = 0; i < n; ++i) {
          if (x.is_observed(i, j) && x.is_observed(i, k)) {
            a.push_back(x.values(i, j));
            b.push_back(x.values(i, k));
          }
        }
        if (a.size() >= 3) rho = pearson(normal_scores(a), normal_scores(b));
      }
      r(j, k) = r(k, j) = rho;
    }
  }
  return r;
}

Matrix floor_eigenvalues(const Matrix& sym, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw Error("floor_eigenvalues: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() >= floor) {
    Matrix out = 0.5 * (sym + sym.transpose());
    return out;
  }
  const Vector lam = es.eigenvalues().cwiseMax(floor);
  Matrix out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error("median: empty input");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace celllts
