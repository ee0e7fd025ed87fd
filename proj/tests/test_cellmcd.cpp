#include "celllts/cellmcd.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace celllts;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Matrix ar1(Index d, double rho) {
  Matrix s(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return s;
}

MaskedMatrix column_data(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return MaskedMatrix::from_nan(m);
}

}  // namespace

TEST(CellMcdObjective, SingleRowAtCenter) {
  const MaskedMatrix x = MaskedMatrix::from_dense(Matrix::Zero(1, 2));
  const double v = objective(x, BinaryMatrix::Ones(1, 2), Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2));
  EXPECT_NEAR(v, 2.0 * kLog2Pi, 1e-14);
  EXPECT_NEAR(v, 3.6758, 1e-4);
}

TEST(CellMcdObjective, FlipCostsPenaltyMinusDeviance) {
  const Matrix s = fixtures::random_spd(3, 5);
  const Vector mu = (Vector(3) << 0.1, -0.2, 0.3).finished();
  const MaskedMatrix x = MaskedMatrix::from_dense(fixtures::gaussian(6, 3, 8));
  const Vector q = (Vector(3) << 5.0, 7.5, 9.0).finished();
  BinaryMatrix w = BinaryMatrix::Ones(6, 3);
  const double before = objective(x, w, mu, s, q);
  const GaussianConditioner g(mu, s);
  const double dev = g.cell_deviance(x.row(2), w.row(2).transpose(), 1);
  w(2, 1) = 0;
  const double after = objective(x, w, mu, s, q);
  EXPECT_NEAR(after - before, q(1) - dev, 1e-11);
}

TEST(CellMcdObjective, MissingCellsContributeNothing) {
  Matrix v(2, 2);
  v << 1, kMissing, 0.5, 2;
  const MaskedMatrix x = MaskedMatrix::from_nan(v);
  const Vector q = Vector::Constant(2, 3.0);
  const double a = objective(x, BinaryMatrix::Ones(2, 2), Vector::Zero(2), Matrix::Identity(2, 2), q);
  BinaryMatrix w = BinaryMatrix::Ones(2, 2);
  w(0, 1) = 0;
  const double b = objective(x, w, Vector::Zero(2), Matrix::Identity(2, 2), q);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a, 3 * kLog2Pi + 1 + 0.25 + 4, 1e-12);
}

TEST(UpdateW, DropsFarCellKeepsNearCell) {
  const double q = chi2_quantile(0.99, 1.0) + kLog2Pi;
  EXPECT_NEAR(q, 8.473, 1e-3);
  const MaskedMatrix x = column_data({3.0, 2.0, 0.0, 0.5});
  const BinaryMatrix w =
      update_W(x, BinaryMatrix::Ones(4, 1), Vector::Zero(1), Matrix::Identity(1, 1), Vector::Constant(1, q), 1);
  EXPECT_NEAR(kLog2Pi + 9.0, 10.84, 1e-2);
  EXPECT_NEAR(kLog2Pi + 4.0, 5.84, 1e-2);
  EXPECT_EQ(w(0, 0), 0);
  EXPECT_EQ(w(1, 0), 1);
  EXPECT_EQ(w(2, 0), 1);
  EXPECT_EQ(w(3, 0), 1);
}

TEST(UpdateW, ColumnFloorDropsOnlyLargestDeviance) {
  const MaskedMatrix x = column_data({11.0, 13.0, 10.0, 12.0});
  const BinaryMatrix w = update_W(x, BinaryMatrix::Ones(4, 1), Vector::Zero(1), Matrix::Identity(1, 1),
                                  Vector::Constant(1, 8.47), 3);
  EXPECT_EQ(w.cast<int>().sum(), 3);
  EXPECT_EQ(w(1, 0), 0);
}

TEST(UpdateW, NeverIncreasesObjective) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Matrix v = fixtures::gaussian(20, 3, seed);
    v.block(0, 0, 3, 1).array() += 6.0;
    v(5, 2) = kMissing;
    const MaskedMatrix x = MaskedMatrix::from_nan(v);
    const Matrix s = fixtures::random_spd(3, seed + 1);
    const Vector mu = Vector::Zero(3), q = Vector::Constant(3, 8.0);
    BinaryMatrix w = BinaryMatrix::Ones(20, 3);
    for (Index i = 0; i < 20; i += 4) w(i, i % 3) = 0;
    const double before = objective(x, w, mu, s, q);
    const BinaryMatrix w2 = update_W(x, w, mu, s, q, 15);
    EXPECT_LE(objective(x, w2, mu, s, q), before + 1e-9 * std::abs(before));
    for (Index j = 0; j < 3; ++j) {
      Index kept = 0;
      for (Index i = 0; i < 20; ++i) kept += w2(i, j) && x.is_observed(i, j);
      EXPECT_GE(kept, std::min<Index>(15, x.observed_count(j)));
    }
  }
}

TEST(UpdateMuSigma, CompleteDataMle) {
  const Matrix v = fixtures::gaussian(25, 3, 4);
  const MaskedMatrix x = MaskedMatrix::from_dense(v);
  const MuSigma ms =
      update_mu_sigma(x, BinaryMatrix::Ones(25, 3), Vector::Zero(3), Matrix::Identity(3, 3), false, 1e-12);
  const Vector mean = v.colwise().mean().transpose();
  const Matrix c = v.rowwise() - mean.transpose();
  EXPECT_LT((ms.mu - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((ms.sigma - c.transpose() * c / 25.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UpdateMuSigma, FixedCenterSecondMoment) {
  const Matrix v = fixtures::gaussian(25, 3, 5);
  const MaskedMatrix x = MaskedMatrix::from_dense(v);
  const MuSigma ms =
      update_mu_sigma(x, BinaryMatrix::Ones(25, 3), Vector::Zero(3), Matrix::Identity(3, 3), true, 1e-12);
  EXPECT_EQ(ms.mu, Vector::Zero(3));
  EXPECT_LT((ms.sigma - v.transpose() * v / 25.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UpdateMuSigma, FlaggedCellMatchesMonotoneMle) {
  // Column 1 of row 3 is flagged; the observed-data MLE has a closed form.
  Matrix v(4, 2);
  v << 0.3, 1.1, -1.2, -0.4, 0.8, 0.2, 2.0, 40.0;
  const MaskedMatrix x = MaskedMatrix::from_dense(v);
  BinaryMatrix w = BinaryMatrix::Ones(4, 2);
  w(3, 1) = 0;
  const MuSigma ms = update_mu_sigma(x, w, Vector::Zero(2), Matrix::Identity(2, 2), false, 1e-12, 5000, 0.0);
  const auto [mu, s] = oracle::monotone_mle(v, {true, true, true, false});
  EXPECT_LT((ms.mu - mu).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((ms.sigma - s).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(UpdateMuSigma, ColumnWithoutKeptCellsIsError) {
  const MaskedMatrix x = MaskedMatrix::from_dense(fixtures::gaussian(5, 2, 1));
  BinaryMatrix w = BinaryMatrix::Ones(5, 2);
  w.col(1).setZero();
  EXPECT_THROW(update_mu_sigma(x, w, Vector::Zero(2), Matrix::Identity(2, 2), false, 1e-6), Error);
}

TEST(Initialize, UncorrelatedIsNearDiagonal) {
  const MaskedMatrix x = MaskedMatrix::from_dense(fixtures::gaussian(400, 4, 31));
  const CellMcdStart st = initialize(x, {});
  for (Index j = 0; j < 4; ++j)
    for (Index k = 0; k < 4; ++k)
      if (j != k) EXPECT_LT(std::abs(st.sigma(j, k)) / std::sqrt(st.sigma(j, j) * st.sigma(k, k)), 0.15);
  EXPECT_TRUE(st.sigma.isApprox(st.sigma.transpose(), 0.0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(st.sigma);
  EXPECT_GE(es.eigenvalues().minCoeff(), st.eig_floor * (1 - 1e-12));
}

TEST(Initialize, FixedCenterIsOrigin) {
  CellMcdOptions o;
  o.fixed_center = true;
  const MaskedMatrix x = MaskedMatrix::from_dense(fixtures::gaussian(50, 3, 2).array() + 4.0);
  EXPECT_EQ(initialize(x, o).mu, Vector::Zero(3));
}

TEST(Initialize, DegenerateColumnIsError) {
  Matrix v = fixtures::gaussian(10, 2, 1);
  v.col(1).setConstant(2.0);
  EXPECT_THROW(initialize(MaskedMatrix::from_dense(v), {}), Error);
}

TEST(FitCellMcd, CleanDataFlagsFewCells) {
  const MaskedMatrix x = MaskedMatrix::from_dense(fixtures::correlated(400, ar1(5, 0.6), 41));
  const CellMcdModel m = fit_cellmcd(x, {});
  const double flagged = 1.0 - m.W.cast<double>().mean();
  EXPECT_LE(flagged, 0.02);
}

TEST(FitCellMcd, TraceIsNonIncreasingAndFeasible) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Index n = 20 + static_cast<Index>(seed * 3), d = 2 + static_cast<Index>(seed % 4);
    Matrix v = fixtures::correlated(n, ar1(d, 0.5), seed);
    for (Index i = 0; i < n / 8; ++i) v((i * 7) % n, i % d) += 8.0;
    v(1, 0) = kMissing;
    const MaskedMatrix x = MaskedMatrix::from_nan(v);
    const CellMcdModel m = fit_cellmcd(x, {});
    for (std::size_t t = 1; t < m.objective_trace.size(); ++t) {
      const double prev = m.objective_trace[t - 1];
      EXPECT_LE(m.objective_trace[t], prev + 1e-9 * std::abs(prev)) << "seed " << seed << " step " << t;
    }
    for (Index j = 0; j < d; ++j) {
      Index kept = 0;
      for (Index i = 0; i < n; ++i) kept += m.W(i, j) && x.is_observed(i, j);
      EXPECT_GE(kept, std::min(m.h, x.observed_count(j)));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.sigma);
    EXPECT_GE(es.eigenvalues().minCoeff(), m.eig_floor * (1 - 1e-9));
  }
}

TEST(FitCellMcd, OutlyingCellsFlaggedScatterStable) {
  const Matrix clean = fixtures::correlated(200, ar1(4, 0.5), 77);
  Matrix dirty = clean;
  for (Index i = 0; i < 20; ++i) dirty(i * 10, 2) = 10.0;
  const CellMcdModel a = fit_cellmcd(MaskedMatrix::from_dense(clean), {});
  const CellMcdModel b = fit_cellmcd(MaskedMatrix::from_dense(dirty), {});
  for (Index i = 0; i < 20; ++i) EXPECT_EQ(b.W(i * 10, 2), 0);
  EXPECT_LT((b.sigma - a.sigma).norm() / a.sigma.norm(), 0.3);
}

TEST(FitCellMcd, RowPermutationEquivariance) {
  Matrix v = fixtures::correlated(60, ar1(3, 0.4), 12);
  for (Index i = 0; i < 6; ++i) v(i * 9, i % 3) = -7.0;
  std::vector<Index> perm(60);
  for (Index i = 0; i < 60; ++i) perm[static_cast<std::size_t>(i)] = (i * 17) % 60;
  Matrix pv(60, 3);
  for (Index i = 0; i < 60; ++i) pv.row(i) = v.row(perm[static_cast<std::size_t>(i)]);
  const CellMcdModel a = fit_cellmcd(MaskedMatrix::from_dense(v), {});
  const CellMcdModel b = fit_cellmcd(MaskedMatrix::from_dense(pv), {});
  EXPECT_LT((a.mu - b.mu).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.sigma - b.sigma).cwiseAbs().maxCoeff(), 1e-10);
  for (Index i = 0; i < 60; ++i)
    EXPECT_TRUE((b.W.row(i) == a.W.row(perm[static_cast<std::size_t>(i)])).all());
}

TEST(FitCellMcd, ColumnScalingEquivariance) {
  Matrix v = fixtures::correlated(80, ar1(3, 0.5), 3);
  for (Index i = 0; i < 8; ++i) v(i * 10, 1) = 9.0;
  const double c = 7.0;
  Matrix v2 = v;
  v2.col(1) *= c;
  CellMcdOptions o1;
  o1.eig_floor = 1e-12;
  const CellMcdStart s1 = initialize(MaskedMatrix::from_dense(v), o1);
  o1.q = s1.q;
  CellMcdOptions o2 = o1;
  o2.q(1) += std::log(c * c);
  const CellMcdModel a = fit_cellmcd(MaskedMatrix::from_dense(v), o1);
  const CellMcdModel b = fit_cellmcd(MaskedMatrix::from_dense(v2), o2);
  EXPECT_TRUE((a.W == b.W).all());
  EXPECT_NEAR(b.mu(1), c * a.mu(1), 1e-9 * c);
  EXPECT_NEAR(b.sigma(1, 1), c * c * a.sigma(1, 1), 1e-9 * c * c);
  EXPECT_NEAR(b.sigma(0, 1), c * a.sigma(0, 1), 1e-9 * c);
  EXPECT_NEAR(b.sigma(0, 2), a.sigma(0, 2), 1e-9);
}

TEST(FitCellMcd, MatchesBruteForceOnTinyInstances) {
  // Default h = ceil(0.75 * 3) = 3.
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Matrix v = fixtures::gaussian(3, 2, seed + 500);
    if (seed % 2) v(seed % 3, 1) += 6.0;
    if (seed % 5 == 0) v((seed / 5) % 3, seed % 2) = kMissing;
    const MaskedMatrix x = MaskedMatrix::from_nan(v);
    CellMcdOptions o;
    o.tol = 0.0;
    o.em_max_sweeps = 20000;
    o.em_tol = 0.0;
    const CellMcdModel m = fit_cellmcd(x, o);
    const CellMcdStart st = initialize(x, o);
    const auto bf = oracle::brute_force_cellmcd(x, m.q, m.eig_floor, m.h, false,
                                                {{st.mu, st.sigma}, {m.mu, m.sigma}});
    EXPECT_NEAR(m.objective_trace.back(), bf.objective, 1e-6) << "seed " << seed;
  }
}

TEST(FitCellMcd, BruteForceBoundsLocalSearch) {
  // With h = 2 the global optimum is often a near-singular Sigma that the
  // alternating algorithm does not reach; the fit can only be worse, never better.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Matrix v = fixtures::gaussian(3, 2, seed + 500);
    if (seed % 2) v(seed % 3, 1) += 6.0;
    const MaskedMatrix x = MaskedMatrix::from_dense(v);
    CellMcdOptions o;
    o.h = 2;
    o.tol = 0.0;
    o.em_max_sweeps = 20000;
    o.em_tol = 0.0;
    const CellMcdModel m = fit_cellmcd(x, o);
    const auto bf = oracle::brute_force_cellmcd(x, m.q, m.eig_floor, 2, false, {{m.mu, m.sigma}});
    EXPECT_LE(bf.objective, m.objective_trace.back() + 1e-9) << "seed " << seed;
    for (Index j = 0; j < 2; ++j) EXPECT_GE(m.W.col(j).cast<Index>().sum(), 2);
  }
}

TEST(ImputeRow, Cases) {
  Matrix s(2, 2);
  s << 1, 0.5, 0.5, 1;
  const GaussianConditioner g(Vector::Zero(2), s);
  const Vector x = (Vector(2) << kMissing, 2.0).finished();
  BinaryVector w(2);
  w << 0, 1;
  EXPECT_NEAR(impute_row(x, w, g)(0), 1.0, 1e-14);
  EXPECT_EQ(impute_row(x, w, g)(1), 2.0);

  const Vector full = (Vector(2) << 0.3, -0.7).finished();
  EXPECT_EQ(impute_row(full, BinaryVector::Ones(2), g), full);
  const Vector mu = (Vector(2) << 1.5, -2.0).finished();
  EXPECT_EQ(impute_row(full, BinaryVector::Zero(2), mu, s), mu);
}

TEST(FlagRow, Cases) {
  const Matrix s = ar1(3, 0.3);
  const Vector mu = (Vector(3) << 1, 2, 3).finished();
  const Vector q = calibrate_penalties(s, 0.99);
  const double cut = flag_cutoff();
  EXPECT_TRUE((flag_row(mu, mu, s, q, cut) == 1).all());
  Vector x = mu;
  x(1) += 10.0;
  const BinaryVector w = flag_row(x, mu, s, q, cut);
  EXPECT_EQ(w(0), 1);
  EXPECT_EQ(w(1), 0);
  EXPECT_EQ(w(2), 1);
  x(2) = kMissing;
  EXPECT_EQ(flag_row(x, mu, s, q, cut)(2), 0);
}

TEST(CalibratePenalties, Formula) {
  Matrix s = Matrix::Identity(2, 2);
  s(1, 1) = 4.0;
  const Vector q = calibrate_penalties(s, 0.99);
  EXPECT_NEAR(q(0), 6.634896601021214 + kLog2Pi, 1e-12);
  EXPECT_NEAR(q(1) - q(0), std::log(4.0), 1e-14);
}

TEST(GaussianConditioner, RejectsIndefinite) {
  Matrix s(2, 2);
  s << 1, 2, 2, 1;
  EXPECT_THROW(GaussianConditioner(Vector::Zero(2), s), Error);
}
