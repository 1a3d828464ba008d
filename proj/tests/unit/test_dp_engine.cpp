#include <gtest/gtest.h>

#include <map>

#include "helpers.hpp"

using namespace pdpm;

TEST(Sticks, WeightsAndResidualPartitionUnity) {
  StickState s{{0.3, 0.5, 0.2}, 1.0};
  const auto w = weights_from_sticks(s, 3);
  EXPECT_DOUBLE_EQ(w[0], 0.3);
  EXPECT_DOUBLE_EQ(w[1], 0.35);
  EXPECT_DOUBLE_EQ(w[2], 0.07);
  EXPECT_NEAR(w[0] + w[1] + w[2] + residual_mass(s, 3), 1.0, 1e-15);
  EXPECT_THROW(weights_from_sticks(s, 4), IndexError);
}

TEST(Sticks, CountsRejectStrayLabels) {
  const std::vector<int> z{0, 1, 1, 3};
  const auto n = component_counts(z, 4);
  EXPECT_EQ(n[1], 2u);
  EXPECT_EQ(n[2], 0u);
  EXPECT_THROW(component_counts(z, 3), StateError);
}

TEST(Sticks, UpdateStaysInOpenInterval) {
  Rng rng(1);
  std::vector<int> z(5000, 0);
  for (int k = 0; k < 100; ++k) {
    const auto s = update_sticks(z, 1.0, rng, 3);
    ASSERT_EQ(s.sticks.size(), 3u);
    for (double v : s.sticks) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  EXPECT_THROW(update_sticks(z, 0.0, rng), DomainError);
}

TEST(Slice, VariablesLieBelowOwnWeight) {
  Rng rng(2);
  const std::vector<int> z{0, 1, 1, 2};
  const std::vector<double> w{0.5, 0.3, 0.1};
  for (int k = 0; k < 100; ++k) {
    const auto u = sample_slice(z, w, rng);
    for (std::size_t i = 0; i < z.size(); ++i) {
      EXPECT_GT(u[i], 0.0);
      EXPECT_LT(u[i], w[static_cast<std::size_t>(z[i])]);
    }
  }
  const std::vector<double> w0{0.5, 0.0, 0.1};
  EXPECT_THROW(sample_slice(z, w0, rng), StateError);
}

TEST(Slice, RequiredComponentsCoversMinimumSlice) {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    StickState s{{0.4}, 1.0};
    const std::vector<double> u{0.01, 0.2};
    const auto H = required_components(u, s, rng);
    EXPECT_EQ(s.sticks.size(), H);
    EXPECT_LT(residual_mass(s, H), 0.01);
    if (H > 1) {
      StickState shorter{std::vector<double>(s.sticks.begin(), s.sticks.end() - 1), 1.0};
      EXPECT_GE(residual_mass(shorter, H - 1), 0.01);
    }
  }
}

TEST(Slice, CapBoundsComponentCount) {
  Rng rng(4);
  StickState s{{}, 5.0};
  const std::vector<double> u{1e-9};
  EXPECT_EQ(required_components(u, s, rng, 3), 3u);
}

TEST(Assignment, GateExcludesComponentsAtOrBelowSlice) {
  Rng rng(5);
  const std::vector<double> ll{100.0, 0.0, 0.0};
  const std::vector<double> w{0.1, 0.5, 0.4};
  for (int k = 0; k < 200; ++k) EXPECT_NE(sample_assignment(ll, 0.2, w, rng), 0);
  EXPECT_THROW(sample_assignment(ll, 0.6, w, rng), StateError);
}

TEST(Assignment, FrequenciesFollowLikelihood) {
  Rng rng(6);
  const std::vector<double> ll{std::log(1.0), std::log(3.0), -1e300};
  const std::vector<double> w{0.4, 0.4, 0.2};
  std::map<int, int> count;
  const int N = 100000;
  for (int k = 0; k < N; ++k) ++count[sample_assignment(ll, 0.1, w, rng)];
  const double p = 0.25, se = std::sqrt(p * (1 - p) / N);
  EXPECT_NEAR(count[0] / double(N), p, 4 * se);
  EXPECT_EQ(count[2], 0);
}

TEST(Labels, CanonicalFirstAppearance) {
  const std::vector<int> z{4, 4, 1, 7, 1};
  const auto c = canonical_labels(z);
  EXPECT_EQ(c, (std::vector<int>{0, 0, 1, 2, 1}));
  EXPECT_EQ(occupied_count(z), 3u);
  EXPECT_EQ(canonical_labels(std::vector<int>{-3, 9, -3, 1000000}), (std::vector<int>{0, 1, 0, 2}));
}
