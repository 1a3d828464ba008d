#include <gtest/gtest.h>

#include <map>
#include <numbers>

#include "helpers.hpp"

using namespace pdpm;
using testing_pdpm::random_matrix;
using testing_pdpm::random_spd;
using testing_pdpm::toy_panels;

namespace {

HyperParams quick(int K, int burn, int iter) {
  HyperParams hp;
  hp.K = K;
  hp.burn_in = burn;
  hp.n_iter = iter;
  return hp;
}

}  // namespace

TEST(Identification, PreservesCovarianceAndFixesSigns) {
  Rng rng(1);
  HyperParams hp;
  for (int rep = 0; rep < 50; ++rep) {
    const auto atom = draw_cov_atom_prior(5, 2, hp, rng);
    const auto id = identify_expanded_params(atom);
    EXPECT_TRUE(id.dense().isApprox(atom.dense(), 1e-12));
    for (int b = 0; b < 2; ++b) EXPECT_GE(id.loadings(b, b), 0.0);
    EXPECT_EQ(id.loadings(0, 1), 0.0);
  }
}

TEST(Identification, FactorsMatchLoadings) {
  Rng rng(2);
  HyperParams hp;
  const auto atom = draw_cov_atom_prior(4, 2, hp, rng);
  const Matrix eta = random_matrix(rng, 2, 10);
  const auto id = identify_expanded_params(atom);
  EXPECT_TRUE((id.loadings * identify_factors(atom, eta)).isApprox(atom.loadings_expanded * eta, 1e-12));
}

TEST(SubjectLoglik, MatchesPanelLikelihood) {
  Rng rng(3);
  const int D = 3, K = 2;
  SubjectPanel p{"a", random_matrix(rng, D, 20)};
  const auto s = SubjectData::from_panel(p, K);
  HyperParams hp;
  const auto atom = draw_cov_atom_prior(D, 2, hp, rng);
  const Matrix W = random_matrix(rng, D, D * K, 0.2);
  const double a = subject_loglik(W, s, make_cov_cache(atom));
  const double b = log_likelihood(p, AutocovSet::from_stacked(W, K), atom.dense());
  EXPECT_NEAR(a, b, 1e-9 * std::abs(b));
}

TEST(CollapsedScore, DifferenceIsLogEvidenceOneDim) {
  // log int exp(b x - m x^2 / 2) N(x; 0, 1/q0) dx by quadrature.
  const double q0 = 2.0, m = 3.0, bb = 1.7;
  const double h = 1e-4;
  double integral = 0;
  for (double x = -20; x <= 20; x += h)
    integral += h * std::exp(bb * x - 0.5 * m * x * x) * std::sqrt(q0 / (2 * std::numbers::pi)) * std::exp(-0.5 * q0 * x * x);
  Matrix Q0 = Matrix::Constant(1, 1, q0), Q1 = Matrix::Constant(1, 1, q0 + m);
  const double diff = detail::collapsed_score(Q1, Vector::Constant(1, bb)) - detail::collapsed_score(Q0, Vector::Zero(1));
  EXPECT_NEAR(diff, std::log(integral), 1e-8);
}

TEST(CollapsedScore, DifferenceIsLogEvidenceTwoDim) {
  Matrix Q0(2, 2), M(2, 2);
  Q0 << 1.5, 0.3, 0.3, 1.0;
  M << 2.0, -0.4, -0.4, 0.8;
  Vector b0(2), b(2);
  b0 << 0.4, -0.2;
  b << 0.5, 1.0;
  // Posterior under (Q0, b0) as the "prior"; evidence of the extra term by grid quadrature.
  const Matrix S0 = Q0.inverse();
  const Vector mu0 = S0 * b0;
  const double norm = 1.0 / (2 * std::numbers::pi * std::sqrt(S0.determinant()));
  const double h = 0.01;
  double integral = 0;
  for (double x = -8; x <= 8; x += h)
    for (double y = -8; y <= 8; y += h) {
      Vector v(2);
      v << x, y;
      const Vector d = v - mu0;
      integral += h * h * norm * std::exp(-0.5 * d.dot(Q0 * d)) * std::exp(b.dot(v) - 0.5 * v.dot(M * v));
    }
  const double diff = detail::collapsed_score(Q0 + M, b0 + b) - detail::collapsed_score(Q0, b0);
  EXPECT_NEAR(diff, std::log(integral), 1e-6);
}

TEST(CollapsedScore, RejectsIndefinite) {
  EXPECT_THROW(detail::collapsed_score(-Matrix::Identity(2, 2), Vector::Zero(2)), NumericalError);
}

// Label chain on one scalar axis against the enumerated partition posterior:
// DP prior alpha^C prod (n_c - 1)! times the product of cluster evidences.
static void check_partition_posterior(int split_merge) {
  Rng rng(77);
  const std::vector<double> coef{0.7, 0.7, -0.5, -0.5};
  std::vector<SubjectPanel> panels;
  for (std::size_t i = 0; i < coef.size(); ++i) {
    Matrix x(1, 6);
    double prev = 0.0;
    for (int t = 0; t < 6; ++t) x(0, t) = prev = coef[i] * prev + rnd::normal(rng);
    panels.push_back({"s" + std::to_string(i), x});
  }
  HyperParams hp;
  hp.K = 1;
  hp.B = 1;
  hp.max_cov_components = 1;
  hp.alpha_A = 0.8;
  hp.split_merge = split_merge;
  const auto data = prepare_data(panels, 1);
  ChainState st = initialize_chain(data, hp, Variant::pdpm, Rng(5));
  st.cov.atoms[0].loadings_expanded(0, 0) = 0.5;
  st.cov.atoms[0].psi[0] = 1.0;
  st.cov.atoms[0].idio_var[0] = 0.75;  // Sigma = 1
  auto& ax = st.axes[0];
  ax.tau2(0, 0) = 0.6;
  const std::vector<CovCache> cache{make_cov_cache(st.cov.atoms[0])};

  auto evidence = [&](const std::vector<int>& members) {
    double q = 1.0 / 0.6, b = 0.0;
    for (int k : members) {
      q += data[static_cast<std::size_t>(k)].Szz(0, 0);
      b += data[static_cast<std::size_t>(k)].Sxz(0, 0);
    }
    return 0.5 * b * b / q - 0.5 * std::log(q * 0.6);
  };
  std::map<std::vector<int>, double> exact;
  double total = 0.0;
  for (int code = 0; code < 256; ++code) {
    std::vector<int> z(4);
    for (int k = 0; k < 4; ++k) z[static_cast<std::size_t>(k)] = (code >> (2 * k)) & 3;
    const auto c = canonical_labels(z);
    if (c != z || exact.count(c)) continue;
    double logp = 0.0;
    for (int g = 0; g < static_cast<int>(occupied_count(c)); ++g) {
      std::vector<int> members;
      for (int k = 0; k < 4; ++k)
        if (c[static_cast<std::size_t>(k)] == g) members.push_back(k);
      logp += std::log(hp.alpha_A) + std::lgamma(static_cast<double>(members.size())) + evidence(members);
    }
    exact[c] = std::exp(logp);
    total += exact[c];
  }
  ASSERT_EQ(exact.size(), 15u);

  std::map<std::vector<int>, double> freq;
  const int N = 200000;
  for (int s = 0; s < 1000 + N; ++s) {
    update_autocov_axis(st, data, hp, 0, cache);
    if (s >= 1000) freq[canonical_labels(ax.labels)] += 1.0 / N;
  }
  for (const auto& [z, w] : exact) EXPECT_NEAR(freq[z], w / total, 0.01) << "split_merge " << split_merge;
}

TEST(Labels, CollapsedChainMatchesPartitionPosterior) { check_partition_posterior(0); }

TEST(Labels, SplitMergeKeepsPartitionPosterior) { check_partition_posterior(25); }

TEST(Sweep, StateInvariantsHold) {
  const auto panels = toy_panels(4, 6, 3, 2, 40);
  auto hp = quick(2, 0, 0);
  const auto data = prepare_data(panels, hp.K);
  for (Variant v : {Variant::pdpm, Variant::lg, Variant::rg}) {
    ChainState st = initialize_chain(data, hp, v, Rng(5));
    for (int s = 0; s < 30; ++s) {
      gibbs_sweep(st, data, hp);
      ASSERT_EQ(st.cov.labels.size(), 6u);
      for (int l : st.cov.labels) ASSERT_LT(static_cast<std::size_t>(l), st.cov.atoms.size());
      for (const auto& a : st.cov.atoms) {
        EXPECT_TRUE((a.psi.array() > 0).all());
        EXPECT_TRUE((a.idio_var.array() > 0).all());
        for (Eigen::Index d = 0; d < a.loadings_expanded.rows(); ++d)
          for (Eigen::Index b = d + 1; b < a.loadings_expanded.cols(); ++b) EXPECT_EQ(a.loadings_expanded(d, b), 0.0);
      }
      for (const auto& ax : st.axes) {
        for (int l : ax.labels) ASSERT_LT(static_cast<std::size_t>(l), ax.atoms.size());
        EXPECT_TRUE((ax.tau2.array() > 0).all());
        EXPECT_GT(ax.lambda2, 0.0);
        for (const auto& a : ax.atoms) {
          EXPECT_EQ(a.rows(), ax.block.rows);
          EXPECT_EQ(a.cols(), ax.block.cols);
        }
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        EXPECT_EQ(st.factors[i].rows(), st.B);
        EXPECT_TRUE(st.See[i].isApprox(st.factors[i] * st.factors[i].transpose()));
      }
    }
    EXPECT_EQ(st.axes.size(), axis_layout(v, 3, 2).size());
  }
}

TEST(Sweep, LagClusteringWithOneLagEqualsSubjectClustering) {
  const auto panels = toy_panels(6, 5, 3, 1, 40);
  const auto hp = quick(1, 5, 20);
  const auto a = run_chain(panels, hp, Variant::pdpm, 9);
  const auto b = run_chain(panels, hp, Variant::lg, 9);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    EXPECT_EQ(a.records[r].axis_labels, b.records[r].axis_labels);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.records[r].coefficients[i], b.records[r].coefficients[i]);
  }
}

TEST(Sweep, ComponentCapOfOnePinsLabels) {
  const auto panels = toy_panels(7, 5, 3, 2, 40);
  auto hp = quick(2, 5, 20);
  hp.max_A_components = 1;
  hp.max_cov_components = 1;
  for (Variant v : {Variant::pdpm, Variant::rg}) {
    const auto d = run_chain(panels, hp, v, 3);
    for (const auto& r : d.records) {
      for (int l : r.cov_labels) EXPECT_EQ(l, 0);
      for (const auto& lab : r.axis_labels)
        for (int l : lab) EXPECT_EQ(l, 0);
      for (std::size_t i = 1; i < 5; ++i) EXPECT_EQ(r.coefficients[i], r.coefficients[0]);
    }
  }
}

TEST(Sweep, LargeBlocksUseFixedAtomPath) {
  const auto panels = toy_panels(8, 5, 3, 2, 40);
  auto hp = quick(2, 5, 10);
  hp.collapse_limit = 0;
  const auto d = run_chain(panels, hp, Variant::pdpm, 2);
  EXPECT_EQ(d.records.size(), 10u);
  for (const auto& r : d.records) EXPECT_TRUE(std::isfinite(r.loglik));
}

TEST(Chain, ThinningAndDeterminism) {
  const auto panels = toy_panels(9, 4, 2, 1, 30);
  auto hp = quick(1, 3, 12);
  hp.thin = 4;
  const auto a = run_chain(panels, hp, Variant::rg, 1);
  const auto b = run_chain(panels, hp, Variant::rg, 1);
  const auto c = run_chain(panels, hp, Variant::rg, 2);
  ASSERT_EQ(a.records.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(a.records[r].loglik, b.records[r].loglik);
  EXPECT_NE(a.records[0].loglik, c.records[0].loglik);
}

TEST(Chain, RowPartitionOfLagClustering) {
  DrawsHeader h{Variant::lg, 4, 2, 2, 1, 2};
  DrawRecord r;
  r.axis_labels = {{0, 0, 1, 1}, {0, 1, 0, 1}};
  EXPECT_EQ(row_partition(h, r, 0), (AssignmentVector{0, 1, 2, 3}));
  r.axis_labels = {{0, 0, 1, 1}, {0, 0, 0, 0}};
  EXPECT_EQ(row_partition(h, r, 1), (AssignmentVector{0, 0, 1, 1}));
}

TEST(Chain, RejectsBadPanels) {
  std::vector<SubjectPanel> p{{"a", Matrix::Zero(2, 10)}, {"b", Matrix::Zero(3, 10)}};
  EXPECT_THROW(prepare_data(p, 1), ShapeError);
  std::vector<SubjectPanel> q{{"a", Matrix::Zero(2, 1)}};
  EXPECT_THROW(prepare_data(q, 1), ShapeError);
  EXPECT_THROW(prepare_data({}, 1), ConfigError);
}
