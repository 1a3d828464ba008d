#include <gtest/gtest.h>

#include <numbers>

#include "helpers.hpp"

using namespace pdpm;
using testing_pdpm::random_matrix;
using testing_pdpm::random_spd;

TEST(LaggedVector, ZeroPadsMissingHistory) {
  SubjectPanel p{"a", Matrix(2, 3)};
  p.data << 1, 2, 3, 4, 5, 6;
  const Vector z0 = build_lagged_vector(p, 0, 2);
  EXPECT_TRUE(z0.isZero());
  const Vector z1 = build_lagged_vector(p, 1, 2);
  EXPECT_EQ(z1[0], 1);
  EXPECT_EQ(z1[1], 4);
  EXPECT_EQ(z1[2], 0);
  EXPECT_EQ(z1[3], 0);
  const Vector z3 = build_lagged_vector(p, 3, 2);  // predictor for the next scan
  EXPECT_EQ(z3[0], 3);
  EXPECT_EQ(z3[1], 6);
  EXPECT_EQ(z3[2], 2);
  EXPECT_EQ(z3[3], 5);
}

TEST(LaggedVector, OutOfRangeThrows) {
  SubjectPanel p{"a", Matrix::Zero(2, 3)};
  EXPECT_THROW(build_lagged_vector(p, 4, 1), IndexError);
  EXPECT_THROW(build_lagged_vector(p, -1, 1), IndexError);
}

TEST(LaggedVector, DesignColumnsMatchVectors) {
  Rng rng(1);
  SubjectPanel p{"a", random_matrix(rng, 3, 7)};
  const Matrix Z = lagged_design(p.data, 3);
  for (Eigen::Index t = 0; t < 7; ++t) EXPECT_EQ((Z.col(t) - build_lagged_vector(p, t, 3)).norm(), 0.0);
}

TEST(AutocovSet, StackRoundTrip) {
  Rng rng(2);
  AutocovSet A{{random_matrix(rng, 3, 3), random_matrix(rng, 3, 3)}};
  const auto B = AutocovSet::from_stacked(A.stacked(), 2);
  EXPECT_EQ(B.lags[0], A.lags[0]);
  EXPECT_EQ(B.lags[1], A.lags[1]);
  EXPECT_THROW(AutocovSet::from_stacked(Matrix::Zero(3, 5), 2), ShapeError);
}

TEST(Likelihood, DenseMatchesScanByScanDensity) {
  Rng rng(3);
  const int D = 3, K = 2, T = 12;
  SubjectPanel p{"a", random_matrix(rng, D, T)};
  AutocovSet A{{random_matrix(rng, D, D, 0.2), random_matrix(rng, D, D, 0.2)}};
  const Matrix S = random_spd(rng, D);
  double oracle = 0;
  const Matrix P = S.inverse();
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector r = p.data.col(t) - conditional_mean(A, build_lagged_vector(p, t, K));
    oracle += -0.5 * (D * std::log(2 * std::numbers::pi) + std::log(S.determinant()) + r.dot(P * r));
  }
  EXPECT_NEAR(log_likelihood(p, A, S), oracle, 1e-9 * std::abs(oracle));
}

TEST(Likelihood, LowRankMatchesDense) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const int D = 4, B = 2;
    SubjectPanel p{"a", random_matrix(rng, D, 30)};
    AutocovSet A{{random_matrix(rng, D, D, 0.3)}};
    LowRankCovariance c{random_matrix(rng, D, B), (random_matrix(rng, D, 1).array().square() + 0.1).matrix().col(0)};
    const double a = log_likelihood(p, A, c.dense());
    const double b = log_likelihood_lowrank(p, A, c);
    EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
  }
}

TEST(Likelihood, RejectsBadCovariance) {
  SubjectPanel p{"a", Matrix::Ones(2, 5)};
  AutocovSet A = AutocovSet::zeros(2, 1);
  Matrix S(2, 2);
  S << 1, 2, 2, 1;
  EXPECT_THROW(log_likelihood(p, A, S), DomainError);
  LowRankCovariance c{Matrix::Ones(2, 1), Vector::Zero(2)};
  EXPECT_THROW(log_likelihood_lowrank(p, A, c), DomainError);
  EXPECT_THROW(log_likelihood(p, A, Matrix::Identity(3, 3)), ShapeError);
}

TEST(Stability, CompanionOfDiagonalLags) {
  AutocovSet A{{0.5 * Matrix::Identity(2, 2)}};
  EXPECT_NEAR(spectral_radius(A), 0.5, 1e-12);
  EXPECT_TRUE(is_stable(A));
  EXPECT_TRUE(is_stable(A, 0.4));
  EXPECT_FALSE(is_stable(A, 0.5));
  // Scalar AR(2) x_t = 0.5 x_{t-1} + 0.3 x_{t-2}: roots of z^2 - 0.5 z - 0.3.
  AutocovSet B{{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.3)}};
  EXPECT_NEAR(spectral_radius(B), (0.5 + std::sqrt(0.25 + 1.2)) / 2, 1e-12);
  EXPECT_THROW(is_stable(A, 1.0), DomainError);
}

TEST(Stability, ScalingLagKByCPowKScalesRadius) {
  Rng rng(5);
  AutocovSet A{{random_matrix(rng, 3, 3, 0.3), random_matrix(rng, 3, 3, 0.3)}};
  const double r = spectral_radius(A);
  AutocovSet B{{0.7 * A.lags[0], 0.49 * A.lags[1]}};
  EXPECT_NEAR(spectral_radius(B), 0.7 * r, 1e-10);
}

TEST(Forecast, ZeroCoefficientsGiveZero) {
  Rng rng(6);
  SubjectPanel p{"a", random_matrix(rng, 3, 10)};
  EXPECT_TRUE(forecast(p, AutocovSet::zeros(3, 2), 5).isZero());
}

TEST(Forecast, MatchesManualRecursion) {
  Rng rng(7);
  SubjectPanel p{"a", random_matrix(rng, 2, 6)};
  AutocovSet A{{random_matrix(rng, 2, 2, 0.3), random_matrix(rng, 2, 2, 0.3)}};
  const Matrix f = forecast(p, A, 3);
  Vector x1 = A.lags[0] * p.data.col(5) + A.lags[1] * p.data.col(4);
  Vector x2 = A.lags[0] * x1 + A.lags[1] * p.data.col(5);
  Vector x3 = A.lags[0] * x2 + A.lags[1] * x1;
  EXPECT_TRUE(f.col(0).isApprox(x1, 1e-14));
  EXPECT_TRUE(f.col(1).isApprox(x2, 1e-14));
  EXPECT_TRUE(f.col(2).isApprox(x3, 1e-14));
  EXPECT_THROW(forecast(p, A, 0), DomainError);
}
