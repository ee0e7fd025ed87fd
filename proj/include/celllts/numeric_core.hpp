#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace celllts {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Binary cell matrix. 1 = observed (for masks) or kept (for weight matrices).
using BinaryMatrix = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using BinaryVector = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// Numeric matrix with an observation mask. Missing cells hold NaN in `values`
// so that an accidental read poisons downstream arithmetic instead of
// silently using a stale payload.
struct MaskedMatrix {
  Matrix values;
  BinaryMatrix observed;
  std::vector<std::string> column_names;

  MaskedMatrix() = default;

  // NaN entries become Missing.
  static MaskedMatrix from_nan(Matrix values, std::vector<std::string> names = {});
  static MaskedMatrix from_dense(const Matrix& values, std::vector<std::string> names = {});

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  bool is_observed(Index i, Index j) const { return observed(i, j) != 0; }

  void set_missing(Index i, Index j);
  void set_value(Index i, Index j, double v);

  // Row as a dense vector, Missing cells as NaN.
  Vector row(Index i) const { return values.row(i).transpose(); }
  Index observed_count(Index j) const;
  void check_invariants() const;
};

struct StandardizationRecord {
  Vector column_scales;
  double response_scale = 1.0;
  Vector column_centers;
};

struct UniMcdResult {
  double location = 0.0;
  double raw_scale = 0.0;
  double scale = 0.0;
  Index subset_start = 0;
};

double chi2_quantile(double p, double df);
double chi2_cdf(double x, double df);
double normal_quantile(double p);

// sqrt(chi2_{1,quantile}); 2.5758 for the default 0.99.
double flag_cutoff(double quantile = 0.99);

// Gaussian consistency factor for the univariate MCD scale at coverage alpha:
// sqrt(alpha / F_{chi2_3}(chi2_{1,alpha})). Equals 1 at alpha = 1.
double mcd_consistency_factor(double alpha);

// Univariate MCD: the contiguous window of `h_sub` sorted values with the
// smallest variance. Ties go to the smallest start index.
UniMcdResult unimcd(std::span<const double> v, Index h_sub);

// Same, after dropping NaN entries. `h_sub` is clamped to the observed count.
UniMcdResult unimcd_observed(std::span<const double> v, Index h_sub);

// Univariate MCD followed by hard-rejection reweighting: keep the values
// within sqrt(chi2_{1,quantile}) scales of the location, recompute mean and
// consistency-corrected sd (capped at the raw scale), repeat until the kept
// set is stable. NaN entries
// are dropped and `h_sub` is clamped as in unimcd_observed.
UniMcdResult unimcd_reweighted(std::span<const double> v, Index h_sub, double quantile = 0.975,
                               int max_steps = 50);

// z_ij = (x_ij - center_j) / scale_j; Missing cells give NaN.
Matrix robust_zscores(const MaskedMatrix& x, const Vector& centers, const Vector& scales);

// 0 where |z| > cutoff or z is missing, else 1.
BinaryMatrix marginal_flag(const Matrix& z, double cutoff);

// Correlation of normal scores of ranks over pairwise-complete cells.
Matrix gaussian_rank_correlation(const MaskedMatrix& x);

// Symmetric eigen-truncation so that every eigenvalue is at least `floor`.
Matrix floor_eigenvalues(const Matrix& sym, double floor);

double median(std::vector<double> v);

}  // namespace celllts
