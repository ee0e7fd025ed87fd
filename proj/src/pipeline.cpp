#include "celllts/pipeline.hpp"

#include "celllts/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace celllts {

Vector CellLtsModel::gamma() const {
  Vector g(beta.size() + 1);
  g(0) = alpha;
  g.tail(beta.size()) = beta;
  return g;
}

namespace {

double dot_prediction(double alpha, const Vector& beta, const Vector& x) {
  return alpha + x.dot(beta);
}

std::string column_label(const MaskedMatrix& x, Index j) {
  return x.column_names.empty() ? std::to_string(j) : x.column_names[static_cast<std::size_t>(j)];
}

}  // namespace

CellLtsModel fit_celllts(const MaskedMatrix& x, const Vector& y, const CellLtsOptions& opts) {
  x.check_invariants();
  const Index n = x.rows(), d = x.cols();
  if (y.size() != n) throw Error("fit: response length does not match number of rows");
  if (n <= d + 1) throw Error("fit: need more cases than predictors plus one");
  if (!(opts.h_fraction > 0.5 && opts.h_fraction <= 1.0)) {
    throw Error("fit: h fraction must lie in (0.5, 1]");
  }
  if (!(opts.lambda > 0.0)) throw Error("fit: lambda must be positive");
  for (Index j = 0; j < d; ++j) {
    if (x.observed_count(j) < 2) throw Error("fit: column " + column_label(x, j) + " has fewer than 2 observed cells");
  }

  CellLtsModel model;
  model.options = opts;
  model.column_names = x.column_names;
  model.h = static_cast<Index>(std::ceil(opts.h_fraction * static_cast<double>(n)));
  const SymScheme scheme = opts.full_pairs
                               ? SymScheme::full()
                               : SymScheme::kperm(opts.k, derive_seed(opts.seed, {0x5c4eULL}));
  const double cutoff = flag_cutoff(opts.flag_quantile);

  // Step 1: scatter of the predictors from cellMCD on the differences.
  const PairSet xpairs = symmetrize(x, scheme);
  CellMcdOptions mopts;
  mopts.h = pair_subset_size(n, model.h, scheme);
  mopts.flag_quantile = opts.flag_quantile;
  mopts.fixed_center = true;
  // Differences of two cases have sd sqrt(2) times the case sd; the cases carry
  // less contamination per column than the pairs, so start from their scales.
  mopts.scales.resize(d);
  for (Index j = 0; j < d; ++j) {
    const auto col = x.values.col(j);
    mopts.scales(j) = std::sqrt(2.0) *
        unimcd_reweighted(std::span<const double>(col.data(), static_cast<std::size_t>(n)), model.h).scale;
  }
  const CellMcdModel sym_model = fit_cellmcd(xpairs.rows, mopts);

  Vector mu(d);
  for (Index j = 0; j < d; ++j) {
    const auto col = x.values.col(j);
    mu(j) = unimcd_observed(std::span<const double>(col.data(), static_cast<std::size_t>(n)), model.h).location;
  }
  const Matrix sigma = 0.5 * sym_model.sigma;
  const GaussianConditioner g(mu, sigma);

  CellMcdModel& cm = model.cov_model;
  cm.mu = mu;
  cm.sigma = sigma;
  cm.q = calibrate_penalties(sigma, opts.flag_quantile);
  cm.h = model.h;
  cm.eig_floor = 0.5 * sym_model.eig_floor;
  cm.objective_trace = sym_model.objective_trace;
  cm.fixed_center = false;
  cm.W.resize(n, d);

  Matrix ximp(n, d);
  for (Index i = 0; i < n; ++i) {
    const Vector row = x.row(i);
    const BinaryVector w = flag_row(row, g, cm.q, cutoff);
    cm.W.row(i) = w.transpose();
    ximp.row(i) = impute_row(row, w, g).transpose();
  }

  // Step 2: trimmed ridge regression on standardized differences.
  std::vector<Index> obs;
  for (Index i = 0; i < n; ++i)
    if (!is_missing(y(i))) obs.push_back(i);
  const auto ny = static_cast<Index>(obs.size());
  if (ny <= d + 1) throw Error("fit: too few observed responses");
  const Index hy = static_cast<Index>(std::ceil(opts.h_fraction * static_cast<double>(ny)));

  Matrix xo(ny, d);
  Vector yo(ny);
  for (Index r = 0; r < ny; ++r) {
    xo.row(r) = ximp.row(obs[static_cast<std::size_t>(r)]);
    yo(r) = y(obs[static_cast<std::size_t>(r)]);
  }
  const auto pairs = ny == n ? xpairs.pair_index : pair_indices(ny, scheme);
  const Index h_pairs = pair_subset_size(ny, hy, scheme);
  model.h_pairs = h_pairs;

  const Vector ysym = sym_vector(yo, pairs);
  const auto m = ysym.size();
  std::vector<double> both(static_cast<std::size_t>(2 * m));
  for (Index r = 0; r < m; ++r) {
    both[static_cast<std::size_t>(r)] = ysym(r);
    both[static_cast<std::size_t>(m + r)] = -ysym(r);
  }
  const double sy = unimcd(both, 2 * h_pairs).scale;
  if (!(sy > 0.0)) throw Error("fit: zero response scale");

  Vector scales(d);
  for (Index j = 0; j < d; ++j) {
    if (!(sigma(j, j) > 0.0)) throw Error("fit: column " + column_label(x, j) + " has zero scale");
    scales(j) = std::sqrt(sigma(j, j));
  }
  model.standardization.column_scales = scales;
  model.standardization.column_centers = mu;
  model.standardization.response_scale = sy;

  Matrix xt(m, d);
  for (Index r = 0; r < m; ++r) {
    const auto [a, b] = pairs[static_cast<std::size_t>(r)];
    xt.row(r) = (xo.row(b) - xo.row(a)).cwiseQuotient(scales.transpose());
  }
  const Vector yt = ysym / sy;

  LtsOptions lopts;
  lopts.lambda = opts.lambda;
  lopts.n_starts = opts.lts_starts;
  lopts.seed = derive_seed(opts.seed, {0x175ULL});
  const LtsFit raw = fit_lts_ridge(xt, yt, h_pairs, lopts);
  model.lts_objective = raw.objective;
  model.lts_csteps = raw.n_csteps;

  const Matrix case_x = xo * scales.cwiseInverse().asDiagonal();
  const Vector case_y = yo / sy;
  const ReweightResult rw =
      reweighted_fit(xt, yt, pairs, case_x, case_y, raw.beta_std, hy, opts.lambda, cutoff);
  model.beta_std = rw.beta;
  model.case_weights = BinaryVector::Zero(n);
  for (Index r = 0; r < ny; ++r) model.case_weights(obs[static_cast<std::size_t>(r)]) = rw.case_weights(r);

  model.beta = (rw.beta * sy).cwiseQuotient(scales);
  const Vector pseudo = yo - xo * model.beta;
  const UniMcdResult icpt = unimcd(std::span<const double>(pseudo.data(), static_cast<std::size_t>(ny)), hy);
  model.alpha = icpt.location;
  model.resid_scale = icpt.scale;

  model.fitted.resize(n);
  for (Index i = 0; i < n; ++i) model.fitted(i) = dot_prediction(model.alpha, model.beta, ximp.row(i).transpose());
  return model;
}

Prediction predict(const CellLtsModel& model, const GaussianConditioner& g, const Vector& x_new) {
  if (x_new.size() != model.dim()) throw Error("predict: dimension mismatch");
  Prediction p;
  p.w_row = flag_row(x_new, g, model.cov_model.q, flag_cutoff(model.options.flag_quantile));
  p.x_imputed = impute_row(x_new, p.w_row, g);
  p.yhat = dot_prediction(model.alpha, model.beta, p.x_imputed);
  return p;
}

Prediction predict(const CellLtsModel& model, const Vector& x_new) {
  return predict(model, GaussianConditioner(model.cov_model.mu, model.cov_model.sigma), x_new);
}

CellResiduals cell_residuals(const CellLtsModel& model, const MaskedMatrix& x, const Vector& y) {
  const Index n = x.rows(), d = x.cols();
  if (d != model.dim() || y.size() != n) throw Error("cell_residuals: dimension mismatch");
  const GaussianConditioner g(model.cov_model.mu, model.cov_model.sigma);
  const double cutoff = flag_cutoff(model.options.flag_quantile);

  CellResiduals out;
  out.predictor_stdres.resize(n, d);
  out.response_stdres.resize(n);
  out.flagged = BinaryMatrix::Zero(n, d + 1);
  out.missing = BinaryMatrix::Zero(n, d + 1);
  for (Index i = 0; i < n; ++i) {
    const Vector row = x.row(i);
    const Prediction p = predict(model, g, row);
    for (Index j = 0; j < d; ++j) {
      if (is_missing(row(j))) {
        out.predictor_stdres(i, j) = kMissing;
        out.missing(i, j) = 1;
        continue;
      }
      double mean = 0.0, var = 0.0;
      g.cell_conditional(row, p.w_row, j, mean, var);
      out.predictor_stdres(i, j) = (row(j) - mean) / std::sqrt(var);
      out.flagged(i, j) = p.w_row(j) ? 0 : 1;
    }
    if (is_missing(y(i))) {
      out.response_stdres(i) = kMissing;
      out.missing(i, d) = 1;
      continue;
    }
    const double r = y(i) - p.yhat;
    double s = 0.0;
    if (model.resid_scale > 0.0)
      s = r / model.resid_scale;
    else if (r != 0.0)
      s = std::copysign(std::numeric_limits<double>::infinity(), r);
    out.response_stdres(i) = s;
    out.flagged(i, d) = std::abs(s) > cutoff ? 1 : 0;
  }
  return out;
}

Index breakdown_mstar(Index n) {
  if (n < 2) throw Error("breakdown_mstar: n must be at least 2");
  const auto nn = static_cast<unsigned __int128>(n);
  const unsigned __int128 disc = 2 * nn * nn - 2 * nn + 1;
  auto s = static_cast<unsigned __int128>(std::sqrt(static_cast<long double>(disc)));
  while (s * s > disc) --s;
  while ((s + 1) * (s + 1) <= disc) ++s;
  // ceil((2n-1-sqrt(D))/2) == floor((2n - isqrt(D))/2) whether or not D is a square.
  return static_cast<Index>((2 * nn - s) / 2);
}

double breakdown_limit_ratio() { return 1.0 - 1.0 / std::sqrt(2.0); }

}  // namespace celllts
