#pragma once

#include "celllts/numeric_core.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace celllts {

// Data extended by d rows sqrt(lambda) * e_j with response 0. The sum of
// squared residuals over those rows equals lambda * ||beta||^2, so a ridge
// penalised trimmed objective becomes an ordinary trimmed objective whose
// subsets must always contain `fixed_set`.
struct AugmentedData {
  Matrix x;
  Vector y;
  Index n_genuine = 0;
  std::vector<Index> fixed_set;
};

AugmentedData augment_ridge(const Matrix& x, const Vector& y, double lambda);

struct CStepResult {
  Vector beta;
  std::vector<Index> next_subset;  // sorted
  double objective = 0.0;          // at beta over next_subset and fixed_set
};

// Least squares on subset U fixed_set, then the h smallest squared residuals
// among genuine rows (ties to the lower index).
CStepResult cstep(const AugmentedData& aug, std::span<const Index> subset);

struct LtsOptions {
  double lambda = 1e-4;
  int n_starts = 500;
  int warm_csteps = 2;
  int n_finalists = 10;
  int max_csteps = 200;
  std::uint64_t seed = 0;
};

struct LtsFit {
  Vector beta_std;
  std::vector<Index> active_set;  // sorted
  double objective = 0.0;
  int n_csteps = 0;
  double scale_resid = 0.0;
  BinaryVector case_weights;
};

// Sum of the h smallest squared residuals plus lambda ||beta||^2, and the
// corresponding subset.
double trimmed_objective(const Matrix& x, const Vector& y, const Vector& beta, Index h_sub,
                         double lambda, std::vector<Index>* subset = nullptr);

// Indices of the h smallest squared residuals (ties to the lower index), sorted.
std::vector<Index> smallest_residuals(const Vector& r, Index h_sub);

// (X_S' X_S + lambda I)^{-1} X_S' y_S over the given rows (all rows if empty).
Vector ridge_solve(const Matrix& x, const Vector& y, double lambda,
                   std::span<const Index> rows = {});

LtsFit fit_lts_ridge(const Matrix& x, const Vector& y, Index h_sub, const LtsOptions& opts = {});

struct ReweightResult {
  Vector beta;
  BinaryVector case_weights;
  Vector case_residuals;  // y_i - x_i' beta_raw - location
  double location = 0.0;
  double scale = 0.0;
  Index pairs_used = 0;
};

// Flags cases whose raw-fit residual exceeds cutoff times the univariate MCD
// scale, then refits ridge least squares on the pairs whose two cases both
// survive.
ReweightResult reweighted_fit(const Matrix& pair_x, const Vector& pair_y,
                              const std::vector<std::pair<Index, Index>>& pair_index,
                              const Matrix& case_x, const Vector& case_y, const Vector& beta_raw,
                              Index h_case, double lambda, double cutoff);

}  // namespace celllts
