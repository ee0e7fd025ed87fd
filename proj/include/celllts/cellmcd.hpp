#pragma once

#include "celllts/numeric_core.hpp"

#include <cstdint>
#include <vector>

namespace celllts {

// Gaussian (mu, Sigma) with a cached precision matrix. All conditional
// quantities for a row are obtained from the precision block of the cells
// that are NOT conditioned on, so rows with few flagged cells are cheap.
class GaussianConditioner {
 public:
  GaussianConditioner(Vector mu, Matrix sigma);

  Index dim() const { return mu_.size(); }
  const Vector& mu() const { return mu_; }
  const Matrix& sigma() const { return sigma_; }
  double log_det() const { return log_det_; }

  // Conditional law of the cells outside `keep` given the kept ones.
  // `x` holds NaN at missing cells; kept cells must be observed.
  struct Conditional {
    std::vector<Index> free_idx;  // cells not conditioned on
    Vector mean;                  // conditional mean of free cells
    Matrix cov;                   // conditional covariance of free cells
    double neg2_loglik = 0.0;     // ln|S_kk| + |k| ln 2pi + MD^2 over kept cells
  };
  Conditional conditional(const Vector& x, const BinaryVector& keep) const;

  // ln|Sigma^(W)| + d(W) ln 2pi + MD^2 for the kept cells of a row.
  double row_neg2_loglik(const Vector& x, const BinaryVector& keep) const;

  // Contribution of observed cell j given the other kept cells:
  // ln(2 pi c) + r^2 / c with c, r the conditional variance and residual.
  double cell_deviance(const Vector& x, BinaryVector keep, Index j) const;

  // Conditional mean and variance of cell j given keep \ {j}.
  void cell_conditional(const Vector& x, BinaryVector keep, Index j, double& mean,
                        double& var) const;

 private:
  Vector mu_;
  Matrix sigma_;
  Matrix precision_;
  double log_det_ = 0.0;
};

struct CellMcdOptions {
  Index h = -1;                 // column floor; <= 0 means ceil(0.75 n)
  Vector q;                     // penalties; empty means calibrate at initialization
  double flag_quantile = 0.99;
  double eig_floor = -1.0;      // <= 0 means 1e-3 * median initial robust variance
  bool fixed_center = false;
  Vector center;                // used with fixed_center; empty means the origin
  Vector scales;                // initial column scales; empty means univariate MCD
  int max_iter = 100;
  double tol = 1e-6;            // outer stop: |change| <= tol per observed cell
  int em_max_sweeps = 20;
  double em_tol = 1e-8;         // EM stop: |change| <= em_tol per kept cell
};

struct CellMcdModel {
  Vector mu;
  Matrix sigma;
  BinaryMatrix W;
  Vector q;
  Index h = 0;
  double eig_floor = 0.0;
  std::vector<double> objective_trace;
  bool fixed_center = false;
};

struct CellMcdStart {
  Vector mu;
  Matrix sigma;
  BinaryMatrix W;
  Vector q;
  Vector scales;  // per-column univariate MCD scales
  double eig_floor = 0.0;
  Index h = 0;
};

// Penalised observed-data objective. Missing cells contribute to neither term.
double objective(const MaskedMatrix& x, const BinaryMatrix& W, const Vector& mu,
                 const Matrix& sigma, const Vector& q);

// Exact minimisation over each column of W in turn (other columns held), under
// the floor ||W_.j||_0 >= min(h, observed_j). Never increases the objective.
BinaryMatrix update_W(const MaskedMatrix& x, const BinaryMatrix& W, const Vector& mu,
                      const Matrix& sigma, const Vector& q, Index h);

struct MuSigma {
  Vector mu;
  Matrix sigma;
  int sweeps = 0;
};

// EM on the observed likelihood, treating W = 0 and missing cells as
// unobserved. Each M-step floors the eigenvalues of Sigma at `eig_floor`, which
// is the exact constrained maximiser, so the likelihood never decreases.
MuSigma update_mu_sigma(const MaskedMatrix& x, const BinaryMatrix& W, const Vector& mu_start,
                        const Matrix& sigma_start, bool fixed_center, double eig_floor,
                        int max_sweeps = 20, double tol = 1e-8);

CellMcdStart initialize(const MaskedMatrix& x, const CellMcdOptions& opts);

CellMcdModel fit_cellmcd(const MaskedMatrix& x, const CellMcdOptions& opts = {});

// Kept cells pass through; flagged or missing cells get their conditional mean.
Vector impute_row(const Vector& x, const BinaryVector& w_row, const GaussianConditioner& g);
Vector impute_row(const Vector& x, const BinaryVector& w_row, const Vector& mu,
                  const Matrix& sigma);

// Flag cells of a single row with (mu, Sigma) fixed: marginal rule start,
// then single-cell flips that strictly lower the row objective, to a fixed point.
BinaryVector flag_row(const Vector& x, const GaussianConditioner& g, const Vector& q,
                      double cutoff);
BinaryVector flag_row(const Vector& x, const Vector& mu, const Matrix& sigma, const Vector& q,
                      double cutoff);

// q_j = chi2_{1,quantile} + ln(2 pi Sigma_jj).
Vector calibrate_penalties(const Matrix& sigma, double quantile);

}  // namespace celllts
