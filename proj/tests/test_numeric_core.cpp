#include "celllts/numeric_core.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace celllts;

namespace {

// Brute force: every contiguous window of the sorted data, two-pass variance
// in long double.
struct WindowOracle {
  double location;
  double raw_scale;
};

WindowOracle window_oracle(std::vector<double> v, Index h) {
  std::sort(v.begin(), v.end());
  long double best = 1e300L;
  WindowOracle out{0, 0};
  for (std::size_t s = 0; s + static_cast<std::size_t>(h) <= v.size(); ++s) {
    long double mean = 0;
    for (Index i = 0; i < h; ++i) mean += v[s + i];
    mean /= h;
    long double ss = 0;
    for (Index i = 0; i < h; ++i) ss += (v[s + i] - mean) * (v[s + i] - mean);
    if (ss < best) {
      best = ss;
      out.location = static_cast<double>(mean);
      out.raw_scale = h > 1 ? static_cast<double>(std::sqrt(ss / (h - 1))) : 0.0;
    }
  }
  return out;
}

}  // namespace

TEST(UniMcd, ConstantVector) {
  const std::vector<double> v{5, 5, 5, 5};
  const auto r = unimcd(v, 3);
  EXPECT_EQ(r.location, 5.0);
  EXPECT_EQ(r.raw_scale, 0.0);
  EXPECT_EQ(r.scale, 0.0);
}

TEST(UniMcd, PicksTightestWindow) {
  const std::vector<double> v{100, 2, 0, 1};
  const auto r = unimcd(v, 3);
  EXPECT_DOUBLE_EQ(r.location, 1.0);
  EXPECT_DOUBLE_EQ(r.raw_scale, 1.0);
  EXPECT_EQ(r.subset_start, 0);
}

TEST(UniMcd, FullSampleIsMeanAndSd) {
  const std::vector<double> v{1, 2};
  EXPECT_DOUBLE_EQ(unimcd(v, 2).location, 1.5);

  const Vector g = fixtures::gaussian_vec(37, 3);
  std::vector<double> w(g.data(), g.data() + g.size());
  const auto r = unimcd(w, 37);
  const double mean = g.mean();
  const double sd = std::sqrt((g.array() - mean).square().sum() / 36.0);
  EXPECT_NEAR(r.location, mean, 1e-14);
  EXPECT_NEAR(r.scale, sd, 1e-14);
  EXPECT_DOUBLE_EQ(mcd_consistency_factor(1.0), 1.0);
}

TEST(UniMcd, MatchesWindowEnumeration) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Index m = 5 + static_cast<Index>(seed % 40);
    const Vector g = fixtures::gaussian_vec(m, seed);
    std::vector<double> v(g.data(), g.data() + m);
    for (Index i = 0; i < m / 5; ++i) v[static_cast<std::size_t>(i)] += 50.0;
    const Index h = (m * 3 + 3) / 4;
    const auto r = unimcd(v, h);
    const auto o = window_oracle(v, h);
    EXPECT_NEAR(r.location, o.location, 1e-12) << "seed " << seed;
    EXPECT_NEAR(r.raw_scale, o.raw_scale, 1e-12) << "seed " << seed;
  }
}

TEST(UniMcd, HugeOutliersDoNotCancel) {
  std::vector<double> v{1e10, -1e10, 1e10, 0.1, 0.2, 0.3, 0.4, 0.5};
  const auto r = unimcd(v, 5);
  EXPECT_NEAR(r.location, 0.3, 1e-15);
  EXPECT_NEAR(r.raw_scale, std::sqrt(0.025), 1e-15);
}

TEST(UniMcd, TranslationAndScaleEquivariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vector g = fixtures::gaussian_vec(30, seed + 100);
    std::vector<double> v(g.data(), g.data() + g.size()), shifted(v), scaled(v);
    for (auto& x : shifted) x += 7.25;
    for (auto& x : scaled) x *= 3.5;
    const auto a = unimcd(v, 23), b = unimcd(shifted, 23), c = unimcd(scaled, 23);
    EXPECT_NEAR(b.location, a.location + 7.25, 1e-12);
    EXPECT_NEAR(b.scale, a.scale, 1e-12);
    EXPECT_NEAR(c.location, 3.5 * a.location, 1e-12);
    EXPECT_NEAR(c.scale, 3.5 * a.scale, 1e-12);
  }
}

TEST(UniMcd, Errors) {
  const std::vector<double> v{1, 2, 3};
  EXPECT_THROW(unimcd(v, 0), Error);
  EXPECT_THROW(unimcd(v, 4), Error);
  EXPECT_THROW(unimcd(std::vector<double>{}, 1), Error);
  const std::vector<double> w{kMissing, 1, 2, kMissing, 4};
  EXPECT_DOUBLE_EQ(unimcd_observed(w, 10).location, 7.0 / 3.0);
}

TEST(Distributions, KnownQuantiles) {
  EXPECT_NEAR(flag_cutoff(), 2.5758293035489, 1e-10);
  EXPECT_NEAR(chi2_quantile(0.99, 1.0), 6.6348966010212, 1e-10);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(chi2_cdf(chi2_quantile(0.3, 3.0), 3.0), 0.3, 1e-12);
  // c(0.5): 0.5 / F_3(chi2_{1,0.5}) computed independently.
  EXPECT_NEAR(mcd_consistency_factor(0.5), 2.6476545355660077, 1e-9);
}

TEST(RobustZscores, Basic) {
  Matrix v(2, 2);
  v << 3, kMissing, -1, 4;
  const MaskedMatrix x = MaskedMatrix::from_nan(v);
  const Matrix z = robust_zscores(x, Vector::Constant(2, 1.0), (Vector(2) << 2.0, 0.5).finished());
  EXPECT_DOUBLE_EQ(z(0, 0), 1.0);
  EXPECT_TRUE(is_missing(z(0, 1)));
  EXPECT_DOUBLE_EQ(z(1, 0), -1.0);
  EXPECT_DOUBLE_EQ(z(1, 1), 6.0);
}

TEST(MarginalFlag, Cutoff) {
  Matrix z(1, 4);
  z << 2.6, 0.0, kMissing, -2.5;
  const BinaryMatrix w = marginal_flag(z, 2.5758);
  EXPECT_EQ(w(0, 0), 0);
  EXPECT_EQ(w(0, 1), 1);
  EXPECT_EQ(w(0, 2), 0);
  EXPECT_EQ(w(0, 3), 1);
}

TEST(MarginalFlag, AffineInvariance) {
  const Matrix g = fixtures::gaussian(40, 3, 9) * 3.0;
  const MaskedMatrix x = MaskedMatrix::from_dense(g);
  const Vector c = Vector::Constant(3, 0.5), s = Vector::Constant(3, 1.3);
  const Vector a = (Vector(3) << 2.0, 0.25, 8.0).finished();
  const Vector b = (Vector(3) << -1.0, 4.0, 0.5).finished();
  const Matrix g2 = (g * a.asDiagonal()).rowwise() + b.transpose();
  const MaskedMatrix x2 = MaskedMatrix::from_dense(g2);
  const BinaryMatrix w1 = marginal_flag(robust_zscores(x, c, s), 2.5758);
  const BinaryMatrix w2 = marginal_flag(
      robust_zscores(x2, c.cwiseProduct(a) + b, s.cwiseProduct(a)), 2.5758);
  EXPECT_TRUE((w1 == w2).all());
}

TEST(MaskedMatrix, NanBecomesMissing) {
  Matrix v(2, 2);
  v << 1, kMissing, 3, 4;
  MaskedMatrix m = MaskedMatrix::from_nan(v);
  EXPECT_FALSE(m.is_observed(0, 1));
  EXPECT_EQ(m.observed_count(1), 1);
  m.set_value(0, 1, 2.0);
  EXPECT_EQ(m.observed_count(1), 2);
  m.set_missing(1, 0);
  EXPECT_TRUE(is_missing(m.values(1, 0)));
  EXPECT_THROW(MaskedMatrix::from_dense(v), Error);
  EXPECT_THROW(MaskedMatrix::from_nan(v, {"a"}), Error);
}

TEST(GaussianRank, UncorrelatedNearIdentity) {
  const MaskedMatrix x = MaskedMatrix::from_dense(fixtures::gaussian(400, 4, 21));
  const Matrix r = gaussian_rank_correlation(x);
  for (Index j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(r(j, j), 1.0);
    for (Index k = 0; k < 4; ++k)
      if (j != k) EXPECT_LT(std::abs(r(j, k)), 0.15);
  }
  EXPECT_TRUE(r.isApprox(r.transpose(), 0.0));
}

TEST(GaussianRank, MonotoneInvariant) {
  const Matrix g = fixtures::gaussian(60, 3, 4);
  Matrix h = g;
  h.col(1) = g.col(1).array().exp();
  h.col(2) = g.col(2).array().cube();
  const Matrix a = gaussian_rank_correlation(MaskedMatrix::from_dense(g));
  const Matrix b = gaussian_rank_correlation(MaskedMatrix::from_dense(h));
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FloorEigenvalues, RaisesSmallEigenvalues) {
  Matrix s(2, 2);
  s << 1, 0.999, 0.999, 1;
  const Matrix f = floor_eigenvalues(s, 0.1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(f);
  EXPECT_NEAR(es.eigenvalues()(0), 0.1, 1e-12);
  EXPECT_NEAR(es.eigenvalues()(1), 1.999, 1e-12);
  EXPECT_TRUE(floor_eigenvalues(Matrix::Identity(3, 3), 0.5).isApprox(Matrix::Identity(3, 3)));
}

TEST(Median, EvenAndOdd) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), Error);
}
