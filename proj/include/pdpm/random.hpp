#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

#include "pdpm/errors.hpp"

namespace pdpm {

using Rng = std::mt19937_64;

// Counter-based stream splitting. A stream is identified by the master seed
// plus a short path of counters, e.g. {chain} or {replicate, 1 + subject};
// each counter is folded in through one splitmix64 finalizer round.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t c : path) s = splitmix64(s ^ splitmix64(c + 1));
  return s;
}

inline Rng make_rng(std::uint64_t master,
                    std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(master, path));
}

namespace rnd {

// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  while (x <= 0.0) x = u(rng);
  return x;
}

inline double normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

// Gamma with shape/rate parameterisation (mean = shape / rate).
inline double gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw DomainError("gamma: shape and rate must be positive");
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

inline double beta(Rng& rng, double a, double b) {
  double x = gamma(rng, a, 1.0);
  double y = gamma(rng, b, 1.0);
  return x / (x + y);
}

inline double chi_square(Rng& rng, double dof) { return gamma(rng, 0.5 * dof, 0.5); }

// Inverse Gaussian(mean, shape) via Michael, Schucany & Haas (1976). The
// root is written in a cancellation-free form so very large means (which
// arise when a cluster-average coefficient is near zero) stay accurate.
inline double inverse_gaussian(Rng& rng, double mean, double shape) {
  if (!(mean > 0.0) || !(shape > 0.0))
    throw DomainError("inverse_gaussian: mean and shape must be positive");
  double nu = normal(rng);
  double y = nu * nu;
  double x = mean;
  if (y > 0.0) {
    double my = mean * y;
    double root = my + std::sqrt(my * my + 4.0 * mean * shape * y);
    x = 4.0 * mean * mean * shape * y / (root * root);
  }
  double u = uniform_open(rng);
  return (u <= mean / (mean + x)) ? x : mean * mean / x;
}

inline Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// Draw from N(Q^{-1} b, Q^{-1}) given the precision Q and linear term b.
inline Eigen::VectorXd gaussian_from_precision(Rng& rng, const Eigen::MatrixXd& Q,
                                               const Eigen::VectorXd& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success)
    throw NumericalError("conditional precision is not positive definite");
  Eigen::VectorXd mean = llt.solve(b);
  Eigen::VectorXd xi = normal_vector(rng, Q.rows());
  // L L' = Q, so L'^{-1} xi has covariance Q^{-1}.
  Eigen::VectorXd dev = llt.matrixU().solve(xi);
  return mean + dev;
}

}  // namespace rnd
}  // namespace pdpm
