#pragma once

#include "celllts/cellmcd.hpp"
#include "celllts/lts_ridge.hpp"
#include "celllts/numeric_core.hpp"
#include "celllts/symmetrize.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace celllts {

struct CellLtsOptions {
  double h_fraction = 0.75;
  double lambda = 1e-4;
  bool full_pairs = false;
  int k = 20;
  std::uint64_t seed = 0;
  double flag_quantile = 0.99;
  int lts_starts = 500;
};

// Fitted cellLTS regression. `cov_model` carries the predictor location and
// scatter on the original scale, the in-sample weight matrix and the
// penalties used to flag new rows.
struct CellLtsModel {
  double alpha = 0.0;
  Vector beta;
  CellMcdModel cov_model;
  StandardizationRecord standardization;
  double resid_scale = 0.0;
  CellLtsOptions options;
  Index h = 0;
  Index h_pairs = 0;
  Vector beta_std;        // final slopes on the standardized pair scale
  double lts_objective = 0.0;
  int lts_csteps = 0;
  BinaryVector case_weights;  // 0 for rows with missing response
  Vector fitted;              // in-sample predictions
  std::vector<std::string> column_names;
  std::string response_name;

  Index dim() const { return beta.size(); }
  // (alpha, beta_1, ..., beta_d)
  Vector gamma() const;
};

struct CellResiduals {
  Matrix predictor_stdres;  // NaN at missing cells
  Vector response_stdres;   // NaN where y is missing
  BinaryMatrix flagged;     // n x (d+1), last column is the response
  BinaryMatrix missing;     // n x (d+1)
};

struct Prediction {
  double yhat = 0.0;
  BinaryVector w_row;
  Vector x_imputed;
};

// y uses NaN for missing responses; such rows still inform the predictor step.
CellLtsModel fit_celllts(const MaskedMatrix& x, const Vector& y, const CellLtsOptions& opts = {});

Prediction predict(const CellLtsModel& model, const Vector& x_new);
Prediction predict(const CellLtsModel& model, const GaussianConditioner& g, const Vector& x_new);

CellResiduals cell_residuals(const CellLtsModel& model, const MaskedMatrix& x, const Vector& y);

// Largest per-column contamination count that keeps fewer than half of the
// symmetrized differences contaminated: ceil((2n-1-sqrt(2n^2-2n+1))/2),
// evaluated with an integer square root.
Index breakdown_mstar(Index n);
double breakdown_limit_ratio();

}  // namespace celllts
