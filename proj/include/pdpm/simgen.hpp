#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdpm/dp_engine.hpp"
#include "pdpm/errors.hpp"
#include "pdpm/random.hpp"
#include "pdpm/var_core.hpp"

namespace pdpm {

/// How the true autocovariance clustering is organised.
enum class TruthLayout { subject, lag, row };

inline std::string to_string(TruthLayout l) {
  switch (l) {
    case TruthLayout::subject: return "subject";
    case TruthLayout::lag: return "lag";
    case TruthLayout::row: return "row";
  }
  return "?";
}

struct SimConfig {
  int setting = 1;                 // 1: subject, 2: lag, 3: row, 4: row + noise
  int n = 100;
  int D = 40;
  int K = 2;
  std::vector<int> T_choices{250};  // each subject draws its scan count from here
  double sparsity = 0.75;
  int holdout = 5;
  std::uint64_t seed = 1;
  int replicates = 1;
  int subject_clusters = 3;            // setting 1
  std::vector<int> lag_clusters{3, 2};  // setting 2; later lags reuse the last entry
  int row_clusters_min = 2;            // settings 3-4
  int row_clusters_max = 5;
  int cov_clusters = 2;
  double coef_min = 0.1;
  double coef_max = 0.5;
  double target_radius = 0.9;
  double noise_sd = 0.05;              // setting 4 per-subject deviation
  int burn = 0;                        // scans dropped before recording; 0 keeps x_1 ~ N(0, Sigma) first

  void validate() const {
    if (setting < 1 || setting > 4) throw ConfigError("setting", "must be 1, 2, 3 or 4");
    if (n < 1) throw ConfigError("n", "must be >= 1");
    if (D < 1) throw ConfigError("D", "must be >= 1");
    if (K < 1) throw ConfigError("K", "must be >= 1");
    if (T_choices.empty()) throw ConfigError("T", "needs at least one scan count");
    for (int t : T_choices)
      if (t < 2) throw ConfigError("T", "scan counts must be >= 2");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("sparsity", "must lie in [0, 1)");
    if (holdout < 0) throw ConfigError("holdout", "must be >= 0");
    if (replicates < 1) throw ConfigError("replicates", "must be >= 1");
    if (subject_clusters < 1) throw ConfigError("subject_clusters", "must be >= 1");
    if (lag_clusters.empty()) throw ConfigError("lag_clusters", "needs at least one entry");
    for (int c : lag_clusters)
      if (c < 1) throw ConfigError("lag_clusters", "entries must be >= 1");
    if (row_clusters_min < 1 || row_clusters_max < row_clusters_min)
      throw ConfigError("row_clusters_min", "need 1 <= row_clusters_min <= row_clusters_max");
    if (cov_clusters < 1) throw ConfigError("cov_clusters", "must be >= 1");
    if (!(coef_min > 0.0 && coef_max >= coef_min)) throw ConfigError("coef_min", "need 0 < coef_min <= coef_max");
    if (!(target_radius > 0.0 && target_radius < 1.0)) throw ConfigError("target_radius", "must lie in (0, 1)");
    if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be >= 0");
    if (burn < 0) throw ConfigError("burn", "must be >= 0");
  }
};

struct GroundTruth {
  std::vector<AutocovSet> subject_A;
  AssignmentVector cov_labels;
  TruthLayout layout = TruthLayout::subject;
  std::vector<AssignmentVector> A_labels;  // one vector per axis of `layout`
  std::vector<Matrix> cluster_Sigma;
  // zero_mask[i][k](r, c) is 1 where A_{ik}(r, c) is a structural zero.
  std::vector<std::vector<Eigen::MatrixXi>> zero_mask;

  std::size_t subjects() const { return subject_A.size(); }
  Matrix subject_sigma(std::size_t i) const { return cluster_Sigma[static_cast<std::size_t>(cov_labels[i])]; }
};

/// Subjects sharing row d of every lag matrix, as a partition per row.
inline std::vector<AssignmentVector> truth_row_partitions(const GroundTruth& g, Eigen::Index D, int K);

/// Bartlett draw of Sigma ~ InverseWishart(dof, scale): Sigma^{-1} = L A A' L'
/// with L L' = scale^{-1}, A lower triangular, A_jj^2 ~ chi^2(dof - j).
inline Matrix sample_inverse_wishart(int dof, const Matrix& scale, Rng& rng) {
  const Eigen::Index D = scale.rows();
  if (dof < D) throw DomainError("inverse Wishart needs dof >= D");
  Eigen::LLT<Matrix> sl(scale.inverse());
  if (sl.info() != Eigen::Success) throw DomainError("inverse Wishart scale must be positive definite");
  Matrix A = Matrix::Zero(D, D);
  for (Eigen::Index j = 0; j < D; ++j) {
    A(j, j) = std::sqrt(rnd::chi_square(rng, static_cast<double>(dof - j)));
    for (Eigen::Index r = j + 1; r < D; ++r) A(r, j) = rnd::normal(rng);
  }
  const Matrix LA = Matrix(sl.matrixL()) * A;
  const Matrix precision = LA * LA.transpose();
  Matrix S = precision.inverse();
  return 0.5 * (S + S.transpose());
}

namespace detail {

/// Random labels for n units over C clusters, every cluster used when n >= C.
inline AssignmentVector planted_labels(int n, int C, Rng& rng) {
  AssignmentVector labels(static_cast<std::size_t>(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> pick(0, C - 1);
  for (int r = 0; r < n; ++r) labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r < C ? r : pick(rng);
  return labels;
}

/// Zeros per row so each lag matrix has exactly round(sparsity * D^2) zeros.
inline std::vector<int> zeros_per_row(int D, double sparsity, Rng& rng) {
  const int total = static_cast<int>(std::lround(sparsity * D * D));
  std::vector<int> z(static_cast<std::size_t>(D), total / D);
  std::vector<int> rows(static_cast<std::size_t>(D));
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  for (int r = 0; r < total % D; ++r) ++z[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])];
  return z;
}

/// One sparse coefficient row of length D: `zeros` entries exactly zero at
/// uniform positions, the rest uniform on +-[lo, hi].
inline Vector sparse_row(int D, int zeros, double lo, double hi, Rng& rng) {
  std::vector<int> pos(static_cast<std::size_t>(D));
  std::iota(pos.begin(), pos.end(), 0);
  std::shuffle(pos.begin(), pos.end(), rng);
  Vector row = Vector::Zero(D);
  std::uniform_real_distribution<double> mag(lo, hi);
  for (int j = zeros; j < D; ++j) {
    const double sign = rnd::uniform_open(rng) < 0.5 ? -1.0 : 1.0;
    row[pos[static_cast<std::size_t>(j)]] = sign * mag(rng);
  }
  return row;
}

inline AutocovSet sparse_set(int D, int K, const std::vector<int>& zrow, const SimConfig& cfg, Rng& rng) {
  AutocovSet A = AutocovSet::zeros(D, K);
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < D; ++d)
      A.lags[static_cast<std::size_t>(k)].row(d) = sparse_row(D, zrow[static_cast<std::size_t>(d)], cfg.coef_min, cfg.coef_max, rng).transpose();
  return A;
}

}  // namespace detail

/// Planted autocovariance structure, covariances and labels for one
/// replicate. Lag k of every shared atom is scaled by c^k, which scales all
/// companion eigenvalues by c while preserving sharing and zeros.
inline GroundTruth gen_truth(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const int n = cfg.n, D = cfg.D, K = cfg.K;
  GroundTruth g;
  const auto zrow = detail::zeros_per_row(D, cfg.sparsity, rng);

  // Shared atoms in a common layout: atoms[axis][h] is an AutocovSet whose
  // non-owned entries are ignored at assembly.
  std::vector<std::vector<AutocovSet>> atoms;
  switch (cfg.setting) {
    case 1: {
      g.layout = TruthLayout::subject;
      const int C = std::min(cfg.subject_clusters, n);
      g.A_labels.push_back(detail::planted_labels(n, C, rng));
      atoms.emplace_back();
      for (int h = 0; h < C; ++h) atoms.back().push_back(detail::sparse_set(D, K, zrow, cfg, rng));
      break;
    }
    case 2: {
      g.layout = TruthLayout::lag;
      for (int k = 0; k < K; ++k) {
        const int want = cfg.lag_clusters[std::min<std::size_t>(static_cast<std::size_t>(k), cfg.lag_clusters.size() - 1)];
        const int C = std::min(want, n);
        g.A_labels.push_back(detail::planted_labels(n, C, rng));
        atoms.emplace_back();
        for (int h = 0; h < C; ++h) atoms.back().push_back(detail::sparse_set(D, K, zrow, cfg, rng));
      }
      break;
    }
    default: {
      g.layout = TruthLayout::row;
      std::uniform_int_distribution<int> count(cfg.row_clusters_min, cfg.row_clusters_max);
      for (int d = 0; d < D; ++d) {
        const int C = std::min(count(rng), n);
        g.A_labels.push_back(detail::planted_labels(n, C, rng));
        atoms.emplace_back();
        for (int h = 0; h < C; ++h) atoms.back().push_back(detail::sparse_set(D, K, zrow, cfg, rng));
      }
      break;
    }
  }

  auto assemble = [&](int i) {
    AutocovSet A = AutocovSet::zeros(D, K);
    for (std::size_t j = 0; j < g.A_labels.size(); ++j) {
      const auto& src = atoms[j][static_cast<std::size_t>(g.A_labels[j][static_cast<std::size_t>(i)])];
      for (int k = 0; k < K; ++k) {
        auto& dst = A.lags[static_cast<std::size_t>(k)];
        switch (g.layout) {
          case TruthLayout::subject: dst = src.lags[static_cast<std::size_t>(k)]; break;
          case TruthLayout::lag:
            if (static_cast<int>(j) == k) dst = src.lags[static_cast<std::size_t>(k)];
            break;
          case TruthLayout::row: dst.row(static_cast<Eigen::Index>(j)) = src.lags[static_cast<std::size_t>(k)].row(static_cast<Eigen::Index>(j)); break;
        }
      }
    }
    return A;
  };

  bool stable = false;
  for (int attempt = 0; attempt < 100 && !stable; ++attempt) {
    double rho = 0.0;
    for (int i = 0; i < n; ++i) rho = std::max(rho, spectral_radius(assemble(i)));
    if (rho < cfg.target_radius) { stable = true; break; }
    const double c = cfg.target_radius / rho * (1.0 - 1e-6);
    for (auto& axis : atoms)
      for (auto& a : axis)
        for (int k = 0; k < K; ++k) a.lags[static_cast<std::size_t>(k)] *= std::pow(c, k + 1);
  }
  if (!stable) throw NumericalError("could not rescale planted autocovariances to a stable radius");

  for (int i = 0; i < n; ++i) {
    AutocovSet A = assemble(i);
    std::vector<Eigen::MatrixXi> mask;
    for (int k = 0; k < K; ++k) mask.push_back((A.lags[static_cast<std::size_t>(k)].array() == 0.0).cast<int>().matrix());
    if (cfg.setting == 4 && cfg.noise_sd > 0.0) {
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        AutocovSet noisy = A;
        for (int k = 0; k < K; ++k)
          for (int c = 0; c < D; ++c)
            for (int r = 0; r < D; ++r)
              if (!mask[static_cast<std::size_t>(k)](r, c)) noisy.lags[static_cast<std::size_t>(k)](r, c) += cfg.noise_sd * rnd::normal(rng);
        if (is_stable(noisy, 0.0)) { A = noisy; ok = true; }
      }
      if (!ok) throw NumericalError("setting-4 deviations stayed unstable after 100 attempts");
    }
    g.subject_A.push_back(std::move(A));
    g.zero_mask.push_back(std::move(mask));
  }

  const int Cs = std::min(cfg.cov_clusters, n);
  g.cov_labels = detail::planted_labels(n, Cs, rng);
  const Matrix scale = Matrix::Identity(D, D) * (static_cast<double>(D) / 2.0);
  for (int h = 0; h < Cs; ++h) g.cluster_Sigma.push_back(sample_inverse_wishart(D, scale, rng));
  return g;
}

struct SimulatedPanel {
  SubjectPanel panel;
  Matrix holdout;  // D x holdout
};

/// x_1 ~ N(0, Sigma), then the VAR recursion with N(0, Sigma) innovations;
/// the first `burn` scans are discarded, the next T recorded and the final
/// `holdout` scans returned separately.
inline SimulatedPanel simulate_panel(const AutocovSet& A, const Matrix& sigma, const std::string& id, int T,
                                     int holdout, Rng& rng, int burn = 0) {
  check_autocov(A);
  const Eigen::Index D = A.dim();
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("innovation covariance must be positive definite");
  const Matrix L = llt.matrixL();
  const int total = burn + T + holdout;
  SubjectPanel path{id, Matrix::Zero(D, total)};
  for (int t = 0; t < total; ++t) {
    const Vector mean = conditional_mean(A, build_lagged_vector(path, t, A.order()));
    path.data.col(t) = mean + L * rnd::normal_vector(rng, D);
  }
  SimulatedPanel out;
  out.panel = SubjectPanel{id, path.data.middleCols(burn, T)};
  out.holdout = path.data.rightCols(holdout);
  return out;
}

inline SimulatedPanel simulate_panel(const GroundTruth& g, std::size_t i, int T, int holdout, Rng& rng,
                                     int burn = 0) {
  if (i >= g.subjects()) throw IndexError("subject index out of range");
  return simulate_panel(g.subject_A[i], g.subject_sigma(i), "s" + std::to_string(i + 1), T, holdout, rng, burn);
}

inline std::vector<AssignmentVector> truth_row_partitions(const GroundTruth& g, Eigen::Index D, int K) {
  const std::size_t n = g.subjects();
  std::vector<AssignmentVector> out;
  for (Eigen::Index d = 0; d < D; ++d) {
    AssignmentVector lab(n);
    switch (g.layout) {
      case TruthLayout::subject: lab = g.A_labels[0]; break;
      case TruthLayout::row: lab = g.A_labels[static_cast<std::size_t>(d)]; break;
      case TruthLayout::lag: {
        // Subjects share row d iff they share every lag.
        int base = 1;
        std::fill(lab.begin(), lab.end(), 0);
        for (int k = 0; k < K; ++k) {
          int C = 0;
          for (int l : g.A_labels[static_cast<std::size_t>(k)]) C = std::max(C, l + 1);
          for (std::size_t i = 0; i < n; ++i) lab[i] += base * g.A_labels[static_cast<std::size_t>(k)][i];
          base *= C;
        }
        break;
      }
    }
    out.push_back(canonical_labels(lab));
  }
  return out;
}

}  // namespace pdpm
