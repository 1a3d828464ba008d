#pragma once

#include <cmath>
#include <vector>

#include "pdpm/pdpm.hpp"

namespace testing_pdpm {

using pdpm::Matrix;
using pdpm::Vector;

struct Moments {
  double mean = 0, var = 0, se_mean = 0, se_var = 0;
};

/// Sample mean/variance and their Monte Carlo standard errors (iid draws).
inline Moments moments(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double m = 0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  return {m, m2, std::sqrt(m2 / n), std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
}

inline Matrix random_matrix(pdpm::Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix M(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = scale * pdpm::rnd::normal(rng);
  return M;
}

inline Matrix random_spd(pdpm::Rng& rng, Eigen::Index D) {
  const Matrix G = random_matrix(rng, D, D);
  return G * G.transpose() + Matrix::Identity(D, D);
}

/// Small simulated panels from a stable random VAR.
inline std::vector<pdpm::SubjectPanel> toy_panels(std::uint64_t seed, int n, int D, int K, int T) {
  pdpm::SimConfig cfg;
  cfg.setting = 1;
  cfg.n = n;
  cfg.D = D;
  cfg.K = K;
  cfg.T_choices = {T};
  cfg.sparsity = 0.5;
  cfg.subject_clusters = 2;
  cfg.cov_clusters = 1;
  cfg.holdout = 0;
  pdpm::Rng rng(seed);
  const auto g = pdpm::gen_truth(cfg, rng);
  std::vector<pdpm::SubjectPanel> out;
  for (int i = 0; i < n; ++i) out.push_back(pdpm::simulate_panel(g, static_cast<std::size_t>(i), T, 0, rng).panel);
  return out;
}

}  // namespace testing_pdpm
