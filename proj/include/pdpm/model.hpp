#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdpm/dp_engine.hpp"
#include "pdpm/errors.hpp"
#include "pdpm/random.hpp"
#include "pdpm/var_core.hpp"

namespace pdpm {

enum class Variant { pdpm, lg, rg };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::pdpm: return "pdpm";
    case Variant::lg: return "lg";
    case Variant::rg: return "rg";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "pdpm") return Variant::pdpm;
  if (s == "lg") return Variant::lg;
  if (s == "rg") return Variant::rg;
  throw ConfigError("variant", "expected one of pdpm, lg, rg; got '" + s + "'");
}

struct HyperParams {
  double alpha_cov = 1.0;  // concentration of the residual-covariance DP
  double alpha_A = 1.0;    // concentration of every autocovariance DP axis
  double a_sigma = 2.0;    // Gamma(a, b) prior on idiosyncratic precisions
  double b_sigma = 1.0;
  double lasso_r = 1.0;    // Gamma(r, delta) prior on lambda^2
  double lasso_delta = 2.0;
  int B = 0;               // factor count; 0 selects ceil(sqrt(D))
  int K = 2;
  int burn_in = 1000;
  int n_iter = 4000;
  int thin = 1;
  // Component caps per DP (0 = unbounded). A cap of 1 pins every unit to a
  // single component and skips the stick/slice machinery for that axis.
  int max_cov_components = 0;
  int max_A_components = 0;
  // Number of k-means groups each axis starts from (0 = ceil(sqrt(n))).
  int init_clusters = 0;
  double ridge = 1e-2;     // relative ridge for the per-subject pre-fit
  // Largest autocovariance block (coefficients per atom) whose atoms are
  // integrated out of the label update; larger blocks use the current atoms.
  int collapse_limit = 256;
  int split_merge = 10;  // split/merge proposals per collapsed axis per sweep

  int factors_for(Eigen::Index D) const {
    return B > 0 ? B : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(D))));
  }

  void validate(Eigen::Index D) const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be a positive finite number");
    };
    positive(alpha_cov, "alpha_cov");
    positive(alpha_A, "alpha_A");
    positive(a_sigma, "a_sigma");
    positive(b_sigma, "b_sigma");
    positive(lasso_r, "lasso_r");
    positive(lasso_delta, "lasso_delta");
    if (!(ridge >= 0.0)) throw ConfigError("ridge", "must be >= 0");
    if (K < 1) throw ConfigError("K", "lag order must be >= 1");
    if (B < 0) throw ConfigError("B", "must be >= 0 (0 selects ceil(sqrt(D)))");
    if (D > 0 && factors_for(D) > D) throw ConfigError("B", "factor count must not exceed D");
    if (burn_in < 0) throw ConfigError("burn_in", "must be >= 0");
    if (n_iter < 0) throw ConfigError("n_iter", "must be >= 0");
    if (thin < 1) throw ConfigError("thin", "must be >= 1");
    if (max_cov_components < 0) throw ConfigError("max_cov_components", "must be >= 0");
    if (max_A_components < 0) throw ConfigError("max_A_components", "must be >= 0");
    if (collapse_limit < 0) throw ConfigError("collapse_limit", "must be >= 0");
    if (split_merge < 0) throw ConfigError("split_merge", "must be >= 0");
    if (init_clusters < 0) throw ConfigError("init_clusters", "must be >= 0");
  }
};

/// The rectangle of the stacked D x DK coefficient matrix owned by one
/// autocovariance clustering axis.
struct AxisBlock {
  Eigen::Index row0 = 0, rows = 0;
  Eigen::Index col0 = 0, cols = 0;

  bool covers_row(Eigen::Index d) const { return d >= row0 && d < row0 + rows; }
};

/// pdpm: one axis over the whole matrix. lg: one axis per lag (all rows,
/// that lag's columns). rg: one axis per row (all lags).
inline std::vector<AxisBlock> axis_layout(Variant v, Eigen::Index D, int K) {
  std::vector<AxisBlock> axes;
  switch (v) {
    case Variant::pdpm: axes.push_back({0, D, 0, D * K}); break;
    case Variant::lg:
      for (int k = 0; k < K; ++k) axes.push_back({0, D, k * D, D});
      break;
    case Variant::rg:
      for (Eigen::Index d = 0; d < D; ++d) axes.push_back({d, 1, 0, D * K});
      break;
  }
  return axes;
}

struct CovarianceAtom {
  Matrix loadings_expanded;  // Gamma*, D x B, zero above the diagonal
  Vector psi;                // working-factor variances (diagonal of Psi)
  Vector idio_var;           // diagonal of Omega

  Matrix dense() const {
    Matrix S = loadings_expanded * psi.asDiagonal() * loadings_expanded.transpose();
    S.diagonal() += idio_var;
    return S;
  }
};

/// Autocovariance atoms, assignments and lasso shrinkage for one axis.
struct AutocovAxis {
  AxisBlock block;
  std::vector<Matrix> atoms;  // each block.rows x block.cols
  AssignmentVector labels;    // per subject
  StickState sticks;
  SliceVariables slice;
  Matrix tau2;                // prior variance per coefficient slot
  double lambda2 = 1.0;
};

struct CovarianceAxis {
  std::vector<CovarianceAtom> atoms;
  AssignmentVector labels;
  StickState sticks;
  SliceVariables slice;
};

/// Per-subject data summaries. Sufficient statistics make every likelihood
/// and regression update independent of T except the latent-factor draw.
struct SubjectData {
  Matrix X;    // D x T
  Matrix Z;    // DK x T lagged design
  Matrix Sxx;  // sum_t x x'
  Matrix Sxz;  // sum_t x z'
  Matrix Szz;  // sum_t z z'

  Eigen::Index scans() const { return X.cols(); }

  static SubjectData from_panel(const SubjectPanel& p, int K) {
    SubjectData s;
    s.X = p.data;
    s.Z = lagged_design(p.data, K);
    s.Sxx = s.X * s.X.transpose();
    s.Sxz = s.X * s.Z.transpose();
    s.Szz = s.Z * s.Z.transpose();
    return s;
  }
};

struct ChainState {
  Variant variant = Variant::pdpm;
  Eigen::Index D = 0;
  int K = 0, B = 0;
  CovarianceAxis cov;
  std::vector<AutocovAxis> axes;
  std::vector<Matrix> factors;  // eta*, per subject B x T
  // Summaries of the current factors: sum_t eta z' (B x DK), sum_t eta x'
  // (B x D) and sum_t eta eta' (B x B).
  std::vector<Matrix> Sez, Sex, See;
  Rng rng;

  std::size_t subjects() const { return cov.labels.size(); }

  /// Subject-level stacked coefficient matrix assembled from the atoms.
  Matrix subject_coefficients(std::size_t i) const {
    Matrix W = Matrix::Zero(D, D * K);
    for (const auto& ax : axes) {
      const auto& atom = ax.atoms[static_cast<std::size_t>(ax.labels[i])];
      W.block(ax.block.row0, ax.block.col0, ax.block.rows, ax.block.cols) = atom;
    }
    return W;
  }

  const CovarianceAtom& subject_cov(std::size_t i) const {
    return cov.atoms[static_cast<std::size_t>(cov.labels[i])];
  }
};

}  // namespace pdpm
