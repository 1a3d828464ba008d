#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace pdpm;
using testing_pdpm::moments;

TEST(Seeding, DerivedStreamsAreReproducibleAndDistinct) {
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
  EXPECT_NE(derive_seed(7, {}), derive_seed(7, {0}));
  Rng a = make_rng(3, {4}), b = make_rng(3, {4});
  for (int k = 0; k < 10; ++k) EXPECT_EQ(a(), b());
}

TEST(Distributions, GammaUsesShapeRate) {
  Rng rng(1);
  std::vector<double> x(100000);
  for (auto& v : x) v = rnd::gamma(rng, 3.0, 2.0);
  const auto m = moments(x);
  EXPECT_NEAR(m.mean, 1.5, 4 * m.se_mean);
  EXPECT_NEAR(m.var, 0.75, 4 * m.se_var);
}

TEST(Distributions, BetaMoments) {
  Rng rng(2);
  std::vector<double> x(100000);
  for (auto& v : x) v = rnd::beta(rng, 2.0, 5.0);
  const auto m = moments(x);
  EXPECT_NEAR(m.mean, 2.0 / 7.0, 4 * m.se_mean);
  EXPECT_NEAR(m.var, 10.0 / (49.0 * 8.0), 4 * m.se_var);
}

TEST(Distributions, InverseGaussianMoments) {
  Rng rng(3);
  std::vector<double> x(100000);
  for (auto& v : x) v = rnd::inverse_gaussian(rng, 2.0, 5.0);
  const auto m = moments(x);
  EXPECT_NEAR(m.mean, 2.0, 4 * m.se_mean);
  EXPECT_NEAR(m.var, 8.0 / 5.0, 4 * m.se_var);
}

TEST(Distributions, InverseGaussianHugeMeanStaysFinite) {
  Rng rng(4);
  for (int k = 0; k < 1000; ++k) {
    const double v = rnd::inverse_gaussian(rng, 1e12, 0.5);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
  }
}

TEST(Distributions, InvalidParametersThrow) {
  Rng rng(5);
  EXPECT_THROW(rnd::gamma(rng, 0.0, 1.0), DomainError);
  EXPECT_THROW(rnd::gamma(rng, 1.0, -1.0), DomainError);
  EXPECT_THROW(rnd::inverse_gaussian(rng, -1.0, 1.0), DomainError);
}

TEST(Distributions, GaussianFromPrecisionMoments) {
  Rng rng(6);
  Matrix Q(2, 2);
  Q << 2.0, 0.5, 0.5, 1.0;
  Vector b(2);
  b << 1.0, -1.0;
  const Vector mu = Q.ldlt().solve(b);
  const Matrix S = Q.inverse();
  const int N = 100000;
  std::vector<double> x0(N), x1(N);
  for (int k = 0; k < N; ++k) {
    const Vector d = rnd::gaussian_from_precision(rng, Q, b);
    x0[k] = d[0];
    x1[k] = d[1];
  }
  const auto m0 = moments(x0), m1 = moments(x1);
  EXPECT_NEAR(m0.mean, mu[0], 4 * m0.se_mean);
  EXPECT_NEAR(m1.mean, mu[1], 4 * m1.se_mean);
  EXPECT_NEAR(m0.var, S(0, 0), 4 * m0.se_var);
  EXPECT_NEAR(m1.var, S(1, 1), 4 * m1.se_var);
}

TEST(Distributions, GaussianFromPrecisionRejectsIndefinite) {
  Rng rng(7);
  Matrix Q(2, 2);
  Q << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(rnd::gaussian_from_precision(rng, Q, Vector::Zero(2)), NumericalError);
}
