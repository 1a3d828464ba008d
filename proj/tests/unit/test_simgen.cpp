#include <gtest/gtest.h>

#include <set>

#include "helpers.hpp"

using namespace pdpm;
using testing_pdpm::moments;

namespace {

SimConfig small(int setting, std::uint64_t seed = 1) {
  SimConfig c;
  c.setting = setting;
  c.n = 12;
  c.D = 6;
  c.K = 2;
  c.T_choices = {50};
  c.seed = seed;
  return c;
}

}  // namespace

TEST(GenTruth, SettingOneHasThreeSharedSets) {
  auto cfg = small(1);
  cfg.n = 6;
  Rng rng(1);
  const auto g = gen_truth(cfg, rng);
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < 6; ++i) {
    const Matrix W = g.subject_A[i].stacked();
    distinct.insert(std::vector<double>(W.data(), W.data() + W.size()));
    for (std::size_t j = 0; j < 6; ++j)
      if (g.A_labels[0][i] == g.A_labels[0][j]) EXPECT_EQ(W, g.subject_A[j].stacked());
  }
  EXPECT_EQ(distinct.size(), 3u);
}

TEST(GenTruth, SettingTwoClustersLagsSeparately) {
  Rng rng(2);
  const auto g = gen_truth(small(2), rng);
  ASSERT_EQ(g.A_labels.size(), 2u);
  EXPECT_EQ(occupied_count(g.A_labels[0]), 3u);
  EXPECT_EQ(occupied_count(g.A_labels[1]), 2u);
  for (int k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < g.subjects(); ++i)
      for (std::size_t j = 0; j < g.subjects(); ++j)
        if (g.A_labels[k][i] == g.A_labels[k][j]) EXPECT_EQ(g.subject_A[i].lags[k], g.subject_A[j].lags[k]);
}

TEST(GenTruth, RowSettingsHaveTwoToFiveDistinctRows) {
  for (int setting : {3, 4}) {
    Rng rng(3);
    const auto g = gen_truth(small(setting), rng);
    ASSERT_EQ(g.A_labels.size(), 6u);
    for (int d = 0; d < 6; ++d) {
      const auto C = occupied_count(g.A_labels[static_cast<std::size_t>(d)]);
      EXPECT_GE(C, 2u);
      EXPECT_LE(C, 5u);
      std::set<std::vector<double>> rows;
      for (std::size_t i = 0; i < g.subjects(); ++i) {
        std::vector<double> r;
        for (int k = 0; k < 2; ++k)
          for (int c = 0; c < 6; ++c) r.push_back(g.subject_A[i].lags[k](d, c));
        rows.insert(r);
        for (std::size_t j = 0; j < g.subjects(); ++j) {
          if (g.A_labels[d][i] != g.A_labels[d][j]) continue;
          for (int k = 0; k < 2; ++k) {
            EXPECT_EQ(g.zero_mask[i][k].row(d), g.zero_mask[j][k].row(d));
            if (setting == 3) EXPECT_EQ(g.subject_A[i].lags[k].row(d), g.subject_A[j].lags[k].row(d));
          }
        }
      }
      if (setting == 3) EXPECT_EQ(rows.size(), C);
    }
  }
}

TEST(GenTruth, ExactZeroCountsAndMagnitudes) {
  auto cfg = small(1);
  cfg.D = 10;
  cfg.sparsity = 0.9;
  Rng rng(4);
  const auto g = gen_truth(cfg, rng);
  for (std::size_t i = 0; i < g.subjects(); ++i)
    for (int k = 0; k < 2; ++k) {
      const Matrix& A = g.subject_A[i].lags[k];
      EXPECT_EQ((A.array() == 0.0).count(), 90);
      EXPECT_EQ(g.zero_mask[i][k].sum(), 90);
      for (Eigen::Index c = 0; c < A.size(); ++c) EXPECT_EQ(A.data()[c] == 0.0, g.zero_mask[i][k].data()[c] == 1);
      // Nonzeros start in [0.1, 0.5] and only ever shrink under rescaling.
      EXPECT_LE(A.cwiseAbs().maxCoeff(), 0.5);
    }
}

TEST(GenTruth, StabilityMargins) {
  for (int setting = 1; setting <= 4; ++setting)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      const auto g = gen_truth(small(setting, seed), rng);
      for (const auto& A : g.subject_A) {
        EXPECT_TRUE(is_stable(A, 0.0));
        if (setting != 4) EXPECT_TRUE(is_stable(A, 0.1 - 1e-12));
      }
    }
}

TEST(GenTruth, EveryPlantedClusterIsOccupied) {
  auto cfg = small(1);
  cfg.n = 3;
  cfg.cov_clusters = 3;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto g = gen_truth(cfg, rng);
    EXPECT_EQ(occupied_count(g.A_labels[0]), 3u);
    EXPECT_EQ(occupied_count(g.cov_labels), 3u);
  }
}

TEST(GenTruth, Deterministic) {
  Rng a(9), b(9);
  const auto g = gen_truth(small(4), a), h = gen_truth(small(4), b);
  for (std::size_t i = 0; i < g.subjects(); ++i) EXPECT_EQ(g.subject_A[i].stacked(), h.subject_A[i].stacked());
  EXPECT_EQ(g.cov_labels, h.cov_labels);
}

TEST(SimConfigValidation, NamesTheField) {
  auto expect_field = [](SimConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL() << "expected ConfigError for " << field;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field);
    }
  };
  auto c = small(1);
  c.setting = 5;
  expect_field(c, "setting");
  c = small(1);
  c.sparsity = 1.0;
  expect_field(c, "sparsity");
  c = small(1);
  c.T_choices = {1};
  expect_field(c, "T");
  c = small(1);
  c.holdout = -1;
  expect_field(c, "holdout");
  c = small(1);
  c.target_radius = 1.0;
  expect_field(c, "target_radius");
}

TEST(InverseWishart, ScalarCaseIsReciprocalChiSquare) {
  Rng a(5), b(5);
  const double s = sample_inverse_wishart(3, Matrix::Identity(1, 1), a)(0, 0);
  EXPECT_NEAR(s, 1.0 / rnd::chi_square(b, 3.0), 1e-12);
}

TEST(InverseWishart, AlwaysSpdAndMeanMatches) {
  Rng rng(6);
  const int D = 3, dof = D + 4, N = 10000;
  const Matrix scale = 1.5 * Matrix::Identity(D, D);
  std::vector<double> x00(N), x01(N);
  for (int k = 0; k < N; ++k) {
    const Matrix S = sample_inverse_wishart(dof, scale, rng);
    if (k < 1000) EXPECT_EQ(Eigen::LLT<Matrix>(S).info(), Eigen::Success);
    x00[k] = S(0, 0);
    x01[k] = S(0, 1);
  }
  const auto m00 = moments(x00), m01 = moments(x01);
  EXPECT_NEAR(m00.mean, 1.5 / (dof - D - 1), 4 * m00.se_mean);
  EXPECT_NEAR(m01.mean, 0.0, 4 * m01.se_mean);
  EXPECT_THROW(sample_inverse_wishart(2, scale, rng), DomainError);
}

TEST(SimulatePanel, ZeroDynamicsGiveIidNoise) {
  Rng rng(7);
  Matrix S(2, 2);
  S << 1.0, 0.3, 0.3, 0.5;
  const auto sim = simulate_panel(AutocovSet::zeros(2, 1), S, "a", 20000, 5, rng);
  EXPECT_EQ(sim.panel.scans(), 20000);
  EXPECT_EQ(sim.holdout.cols(), 5);
  const Matrix C = sim.panel.data * sim.panel.data.transpose() / 20000.0;
  EXPECT_NEAR(C(0, 0), 1.0, 0.05);
  EXPECT_NEAR(C(0, 1), 0.3, 0.03);
  EXPECT_NEAR(C(1, 1), 0.5, 0.03);
}

TEST(SimulatePanel, ArOneAutocorrelation) {
  Rng rng(8);
  const int T = 10000;
  AutocovSet A{{Matrix::Constant(1, 1, 0.8)}};
  const auto sim = simulate_panel(A, Matrix::Identity(1, 1), "a", T, 0, rng);
  const Eigen::RowVectorXd x = sim.panel.data.row(0).array() - sim.panel.data.row(0).mean();
  const double r = x.head(T - 1).dot(x.tail(T - 1)) / x.squaredNorm();
  // Bartlett: Var(r_1) ~ (1 - a^2) / T for an AR(1).
  EXPECT_NEAR(r, 0.8, 3 * std::sqrt((1 - 0.64) / T));
}

TEST(SimulatePanel, FirstScansFollowTheLikelihoodStart) {
  // Without burn-in x_1 ~ N(0, Sigma) and x_2 - A x_1 ~ N(0, Sigma) whatever A is.
  Rng rng(9);
  Matrix S(2, 2);
  S << 2.0, -0.4, -0.4, 0.5;
  AutocovSet A{{(Matrix(2, 2) << 0.5, 0.3, -0.2, 0.4).finished()}};
  const int N = 20000;
  Matrix C1 = Matrix::Zero(2, 2), C2 = Matrix::Zero(2, 2);
  for (int k = 0; k < N; ++k) {
    const auto sim = simulate_panel(A, S, "a", 2, 0, rng);
    const Vector x1 = sim.panel.data.col(0), e2 = sim.panel.data.col(1) - A.lags[0] * x1;
    C1 += x1 * x1.transpose() / N;
    C2 += e2 * e2.transpose() / N;
  }
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const double se = std::sqrt((S(r, r) * S(c, c) + S(r, c) * S(r, c)) / N);
      EXPECT_NEAR(C1(r, c), S(r, c), 4 * se);
      EXPECT_NEAR(C2(r, c), S(r, c), 4 * se);
    }
}

TEST(SimulatePanel, SeedsReproduce) {
  Rng g0(1);
  const auto g = gen_truth(small(1), g0);
  Rng a(3), b(3);
  const auto p = simulate_panel(g, 2, 40, 5, a), q = simulate_panel(g, 2, 40, 5, b);
  EXPECT_EQ(p.panel.data, q.panel.data);
  EXPECT_EQ(p.holdout, q.holdout);
  EXPECT_EQ(p.panel.id, "s3");
}
