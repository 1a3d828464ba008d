#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdpm/errors.hpp"

namespace pdpm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One subject's observations: rows are variables (nodes), columns are scans.
struct SubjectPanel {
  std::string id;
  Matrix data;

  Eigen::Index dim() const { return data.rows(); }
  Eigen::Index scans() const { return data.cols(); }
};

/// Lag matrices A_1..A_K of a VAR(K), each D x D.
struct AutocovSet {
  std::vector<Matrix> lags;

  int order() const { return static_cast<int>(lags.size()); }
  Eigen::Index dim() const { return lags.empty() ? 0 : lags.front().rows(); }

  static AutocovSet zeros(Eigen::Index D, int K) {
    return AutocovSet{std::vector<Matrix>(static_cast<std::size_t>(K), Matrix::Zero(D, D))};
  }

  /// [A_1 ... A_K] as a single D x DK coefficient matrix.
  Matrix stacked() const {
    const Eigen::Index D = dim();
    Matrix W(D, D * order());
    for (int k = 0; k < order(); ++k) W.middleCols(k * D, D) = lags[k];
    return W;
  }

  static AutocovSet from_stacked(const Matrix& W, int K) {
    if (K < 1 || W.cols() != W.rows() * K)
      throw ShapeError("from_stacked: expected D x DK coefficient matrix");
    const Eigen::Index D = W.rows();
    AutocovSet A;
    A.lags.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) A.lags.push_back(W.middleCols(k * D, D));
    return A;
  }
};

/// Residual covariance in factor form, Sigma = Gamma Gamma' + diag(idio_var).
struct LowRankCovariance {
  Matrix loadings;
  Vector idio_var;

  Matrix dense() const {
    Matrix S = loadings * loadings.transpose();
    S.diagonal() += idio_var;
    return S;
  }
};

inline void check_autocov(const AutocovSet& A) {
  if (A.lags.empty()) throw ShapeError("autocovariance set needs at least one lag");
  const Eigen::Index D = A.lags.front().rows();
  for (const auto& M : A.lags)
    if (M.rows() != D || M.cols() != D) throw ShapeError("lag matrices must all be D x D");
}

/// Stacked lag vector z_t = [x_{t-1}; ...; x_{t-K}], zero where no history
/// exists. `t` is a 0-based scan index in [0, T]; t == T yields the
/// predictor for the first out-of-sample scan.
inline Vector build_lagged_vector(const SubjectPanel& panel, Eigen::Index t, int K) {
  if (K < 1) throw ShapeError("lag order must be >= 1");
  if (t < 0 || t > panel.scans())
    throw IndexError("scan index " + std::to_string(t) + " outside [0, " +
                     std::to_string(panel.scans()) + "]");
  const Eigen::Index D = panel.dim();
  Vector z = Vector::Zero(D * K);
  for (int k = 1; k <= K && t - k >= 0; ++k) z.segment((k - 1) * D, D) = panel.data.col(t - k);
  return z;
}

/// All lag vectors as columns: a DK x T design matrix.
inline Matrix lagged_design(const Matrix& X, int K) {
  const Eigen::Index D = X.rows(), T = X.cols();
  Matrix Z = Matrix::Zero(D * K, T);
  for (int k = 1; k <= K; ++k)
    if (T > k) Z.block((k - 1) * D, k, D, T - k) = X.leftCols(T - k);
  return Z;
}

inline Vector conditional_mean(const AutocovSet& A, const Vector& z) {
  check_autocov(A);
  const Eigen::Index D = A.dim();
  if (z.size() != D * A.order()) throw ShapeError("lag vector length must equal D*K");
  Vector mu = Vector::Zero(D);
  for (int k = 0; k < A.order(); ++k) mu.noalias() += A.lags[k] * z.segment(k * D, D);
  return mu;
}

namespace detail {

inline Matrix residuals(const SubjectPanel& panel, const AutocovSet& A) {
  check_autocov(A);
  if (A.dim() != panel.dim()) throw ShapeError("panel and lag matrices disagree on D");
  return panel.data - A.stacked() * lagged_design(panel.data, A.order());
}

}  // namespace detail

/// Exact VAR log-likelihood with a dense residual covariance. The first K
/// scans condition on whatever history exists (zero-padded lags), and the
/// first scan is a zero-mean draw.
inline double log_likelihood(const SubjectPanel& panel, const AutocovSet& A, const Matrix& sigma) {
  const Eigen::Index D = panel.dim();
  if (sigma.rows() != D || sigma.cols() != D) throw ShapeError("sigma must be D x D");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("sigma is not positive definite");
  const Matrix R = detail::residuals(panel, A);
  const Matrix L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double quad = llt.matrixL().solve(R).squaredNorm();
  const double T = static_cast<double>(panel.scans());
  return -0.5 * (T * (D * std::log(2.0 * std::numbers::pi) + logdet) + quad);
}

/// Same likelihood with Sigma = Gamma Gamma' + Omega, evaluated through the
/// Woodbury and matrix-determinant identities in O(D B^2) per scan.
inline double log_likelihood_lowrank(const SubjectPanel& panel, const AutocovSet& A,
                                     const LowRankCovariance& cov) {
  const Eigen::Index D = panel.dim();
  const Matrix& G = cov.loadings;
  if (cov.idio_var.size() != D || G.rows() != D) throw ShapeError("covariance must have D rows");
  if ((cov.idio_var.array() <= 0.0).any()) throw DomainError("idiosyncratic variances must be > 0");
  const Eigen::Index B = G.cols();

  const Vector omega_inv = cov.idio_var.cwiseInverse();
  const Matrix OiG = omega_inv.asDiagonal() * G;               // D x B
  Matrix core = Matrix::Identity(B, B) + G.transpose() * OiG;  // I + G' Oi G
  Eigen::LLT<Matrix> llt(core);
  if (llt.info() != Eigen::Success) throw NumericalError("low-rank core is not positive definite");
  const double logdet = cov.idio_var.array().log().sum() +
                        2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();

  const Matrix R = detail::residuals(panel, A);
  const double quad_diag = (R.array().square().colwise() * omega_inv.array()).sum();
  const Matrix V = OiG.transpose() * R;  // B x T
  const double quad_corr = Matrix(llt.matrixL().solve(V)).squaredNorm();
  const double T = static_cast<double>(panel.scans());
  return -0.5 * (T * (D * std::log(2.0 * std::numbers::pi) + logdet) + quad_diag - quad_corr);
}

inline Matrix companion_matrix(const AutocovSet& A) {
  check_autocov(A);
  const Eigen::Index D = A.dim();
  const int K = A.order();
  Matrix C = Matrix::Zero(D * K, D * K);
  C.topRows(D) = A.stacked();
  if (K > 1) C.bottomLeftCorner(D * (K - 1), D * (K - 1)).setIdentity();
  return C;
}

inline double spectral_radius(const AutocovSet& A) {
  Eigen::EigenSolver<Matrix> es(companion_matrix(A), /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool is_stable(const AutocovSet& A, double margin = 0.0) {
  if (margin < 0.0 || margin >= 1.0) throw DomainError("stability margin must lie in [0, 1)");
  return spectral_radius(A) < 1.0 - margin;
}

/// Iterated point forecasts for scans T+1..T+h; each column feeds back as
/// history for the next step.
inline Matrix forecast(const SubjectPanel& panel, const AutocovSet& A, int horizon) {
  check_autocov(A);
  if (horizon < 1) throw DomainError("forecast horizon must be >= 1");
  const Eigen::Index D = panel.dim(), T = panel.scans();
  SubjectPanel extended{panel.id, Matrix(D, T + horizon)};
  extended.data.leftCols(T) = panel.data;
  for (int j = 0; j < horizon; ++j) {
    const Vector z = build_lagged_vector(extended, T + j, A.order());
    extended.data.col(T + j) = conditional_mean(A, z);
  }
  return extended.data.rightCols(horizon);
}

}  // namespace pdpm
