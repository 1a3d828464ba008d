#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdpm/dp_engine.hpp"
#include "pdpm/errors.hpp"
#include "pdpm/var_core.hpp"

namespace pdpm {

// ---------------------------------------------------------------------------
// Clustering agreement

/// Permutation-model adjusted Rand index from the contingency table.
/// Two trivial partitions of the same kind (both all-one or both
/// all-singletons) have zero denominator; they agree exactly and score 1.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ShapeError("partitions have different lengths");
  if (a.size() < 2) throw ShapeError("adjusted Rand index needs at least two units");
  const auto ca = canonical_labels(a), cb = canonical_labels(b);
  const std::size_t ka = occupied_count(ca), kb = occupied_count(cb);
  std::vector<double> table(ka * kb, 0.0), row(ka, 0.0), col(kb, 0.0);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    table[static_cast<std::size_t>(ca[i]) * kb + static_cast<std::size_t>(cb[i])] += 1.0;
    row[static_cast<std::size_t>(ca[i])] += 1.0;
    col[static_cast<std::size_t>(cb[i])] += 1.0;
  }
  auto pairs = [](double x) { return 0.5 * x * (x - 1.0); };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (double v : table) index += pairs(v);
  for (double v : row) sa += pairs(v);
  for (double v : col) sb += pairs(v);
  const double expected = sa * sb / pairs(static_cast<double>(ca.size()));
  const double maximum = 0.5 * (sa + sb);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

/// Fraction of draws in which units i and j share a label.
inline Matrix similarity_matrix(const std::vector<AssignmentVector>& draws) {
  if (draws.empty()) throw ShapeError("similarity matrix needs at least one draw");
  const auto n = static_cast<Eigen::Index>(draws.front().size());
  Matrix S = Matrix::Zero(n, n);
  for (const auto& z : draws) {
    if (static_cast<Eigen::Index>(z.size()) != n) throw ShapeError("label draws have different lengths");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (z[static_cast<std::size_t>(i)] == z[static_cast<std::size_t>(j)]) S(i, j) += 1.0;
  }
  return S / static_cast<double>(draws.size());
}

/// Least-squares point clustering: the sampled partition closest in squared
/// distance to the similarity matrix. Ties go to the earliest draw.
inline AssignmentVector point_clustering(const std::vector<AssignmentVector>& draws) {
  const Matrix S = similarity_matrix(draws);
  const auto n = S.rows();
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t s = 0; s < draws.size(); ++s) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double same = draws[s][static_cast<std::size_t>(i)] == draws[s][static_cast<std::size_t>(j)] ? 1.0 : 0.0;
        loss += (same - S(i, j)) * (same - S(i, j));
      }
    if (loss < best) {
      best = loss;
      arg = s;
    }
  }
  return canonical_labels(draws[arg]);
}

// ---------------------------------------------------------------------------
// Estimation error

/// ||est - truth||_order / ||truth||_order over the flattened entries.
inline double relative_error(const Matrix& est, const Matrix& truth, int order) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) throw ShapeError("estimate and truth shapes differ");
  if (order != 1 && order != 2) throw DomainError("order must be 1 or 2");
  const double den = order == 1 ? truth.cwiseAbs().sum() : truth.norm();
  if (!(den > 0.0)) throw DomainError("truth has zero norm");
  const Matrix diff = est - truth;
  return (order == 1 ? diff.cwiseAbs().sum() : diff.norm()) / den;
}

/// Same, flattened across a list of equally shaped arrays (e.g. subjects).
inline double relative_error(const std::vector<Matrix>& est, const std::vector<Matrix>& truth, int order) {
  if (est.size() != truth.size()) throw ShapeError("estimate and truth counts differ");
  if (order != 1 && order != 2) throw DomainError("order must be 1 or 2");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (est[i].rows() != truth[i].rows() || est[i].cols() != truth[i].cols())
      throw ShapeError("estimate and truth shapes differ");
    const Matrix diff = est[i] - truth[i];
    num += order == 1 ? diff.cwiseAbs().sum() : diff.squaredNorm();
    den += order == 1 ? truth[i].cwiseAbs().sum() : truth[i].squaredNorm();
  }
  if (!(den > 0.0)) throw DomainError("truth has zero norm");
  return order == 1 ? num / den : std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Credible-interval selection

struct CurvePoints {
  std::vector<std::pair<double, double>> points;
  double auc = std::numeric_limits<double>::quiet_NaN();
  bool defined = true;
};

struct CredibleCurves {
  CurvePoints roc;
  CurvePoints pr;
  std::size_t dropped_pr_points = 0;  // levels with no selection (precision undefined)
};

/// Type-7 (linear interpolation) sample quantile of a sorted vector.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ShapeError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Trapezoidal area after a stable sort by x; points tied in x keep their
/// input (threshold) order.
inline double trapezoid(std::vector<std::pair<double, double>>& pts) {
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k)
    area += (pts[k].first - pts[k - 1].first) * 0.5 * (pts[k].second + pts[k - 1].second);
  return area;
}

/// Equal-tailed (1 - gamma) interval per coefficient; samples is
/// draws x coefficients.
inline std::pair<Vector, Vector> credible_bounds(const Matrix& samples, double gamma) {
  const auto P = samples.cols();
  Vector lo(P), hi(P);
  std::vector<double> col(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index j = 0; j < P; ++j) {
    for (Eigen::Index s = 0; s < samples.rows(); ++s) col[static_cast<std::size_t>(s)] = samples(s, j);
    std::sort(col.begin(), col.end());
    lo[j] = sorted_quantile(col, 0.5 * gamma);
    hi[j] = sorted_quantile(col, 1.0 - 0.5 * gamma);
  }
  return {lo, hi};
}

/// For each gamma in `grid` a coefficient is selected iff its equal-tailed
/// (1 - gamma) interval excludes zero. ROC (FPR, TPR) is anchored at (0,0)
/// and (1,1); PR (recall, precision) drops levels with no selection and is
/// extended flat to recall 0 from its smallest-recall point.
/// `truth_nonzero[j]` marks coefficients that are truly nonzero.
inline CredibleCurves credible_curves(const Matrix& samples, const std::vector<bool>& truth_nonzero,
                                      const std::vector<double>& grid) {
  if (samples.rows() < 2) throw ShapeError("credible curves need at least two draws per coefficient");
  if (static_cast<std::size_t>(samples.cols()) != truth_nonzero.size()) throw ShapeError("mask length differs from coefficient count");
  for (double g : grid)
    if (!(g > 0.0 && g < 1.0)) throw DomainError("credible levels must lie in (0, 1)");
  const auto P = static_cast<std::size_t>(samples.cols());
  const std::size_t positives = static_cast<std::size_t>(std::count(truth_nonzero.begin(), truth_nonzero.end(), true));
  const std::size_t negatives = P - positives;

  CredibleCurves out;
  if (positives == 0 || negatives == 0) {
    out.roc.defined = out.pr.defined = false;
    return out;
  }
  // Sort each coefficient once; bounds per level are quantiles of these.
  std::vector<std::vector<double>> sorted(P, std::vector<double>(static_cast<std::size_t>(samples.rows())));
  for (std::size_t j = 0; j < P; ++j) {
    for (Eigen::Index s = 0; s < samples.rows(); ++s) sorted[j][static_cast<std::size_t>(s)] = samples(s, static_cast<Eigen::Index>(j));
    std::sort(sorted[j].begin(), sorted[j].end());
  }
  // Levels in increasing order give nested selections, so both curves are
  // traced in threshold order.
  std::vector<double> levels(grid.begin(), grid.end());
  std::sort(levels.begin(), levels.end());
  std::vector<std::pair<double, double>> roc{{0.0, 0.0}}, pr;
  for (double g : levels) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t j = 0; j < P; ++j) {
      const double lo = sorted_quantile(sorted[j], 0.5 * g), hi = sorted_quantile(sorted[j], 1.0 - 0.5 * g);
      if (lo > 0.0 || hi < 0.0) (truth_nonzero[j] ? tp : fp) += 1;
    }
    roc.emplace_back(static_cast<double>(fp) / static_cast<double>(negatives),
                     static_cast<double>(tp) / static_cast<double>(positives));
    if (tp + fp == 0) {
      ++out.dropped_pr_points;
      continue;
    }
    pr.emplace_back(static_cast<double>(tp) / static_cast<double>(positives),
                    static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  roc.emplace_back(1.0, 1.0);
  out.roc.auc = trapezoid(roc);
  out.roc.points = std::move(roc);
  if (pr.empty()) {
    out.pr.defined = false;
    return out;
  }
  trapezoid(pr);
  if (pr.front().first > 0.0) pr.insert(pr.begin(), {0.0, pr.front().second});
  out.pr.auc = trapezoid(pr);
  out.pr.points = std::move(pr);
  return out;
}

/// Levels 0.005, 0.010, ..., 0.995.
inline std::vector<double> default_credible_grid() {
  std::vector<double> g;
  for (int k = 1; k < 200; ++k) g.push_back(0.005 * k);
  return g;
}

struct SelectionResult {
  Vector lower, upper;      // equal-tailed interval at `interval_level`
  Vector tail_probability;  // 2 min(P(theta >= 0), P(theta <= 0)), capped at 1
  std::vector<bool> selected;
  double fdr_level = 0.0;
  double interval_level = 0.95;
};

/// Benjamini-Hochberg step-up on p-values: indices with p <= p_(k*),
/// k* the largest k with p_(k) <= k q / m. p >= 1 is never selected.
inline std::vector<bool> benjamini_hochberg(const Vector& p, double q) {
  const auto m = static_cast<std::size_t>(p.size());
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[static_cast<Eigen::Index>(a)] < p[static_cast<Eigen::Index>(b)]; });
  double cut = -1.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double pk = p[static_cast<Eigen::Index>(order[k])];
    if (pk <= static_cast<double>(k + 1) * q / static_cast<double>(m)) cut = pk;
  }
  std::vector<bool> sel(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    const double pj = p[static_cast<Eigen::Index>(j)];
    sel[j] = pj <= cut && pj < 1.0;
  }
  return sel;
}

/// samples: draws x coefficients.
inline SelectionResult fdr_select(const Matrix& samples, double q, double interval_level = 0.95) {
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("FDR level must lie in (0, 1]");
  if (samples.rows() < 1) throw ShapeError("selection needs at least one draw");
  SelectionResult r;
  r.fdr_level = q;
  r.interval_level = interval_level;
  std::tie(r.lower, r.upper) = credible_bounds(samples, 1.0 - interval_level);
  const auto P = samples.cols();
  const double S = static_cast<double>(samples.rows());
  r.tail_probability.resize(P);
  for (Eigen::Index j = 0; j < P; ++j) {
    const double nonneg = static_cast<double>((samples.col(j).array() >= 0.0).count()) / S;
    const double nonpos = static_cast<double>((samples.col(j).array() <= 0.0).count()) / S;
    r.tail_probability[j] = std::min(1.0, 2.0 * std::min(nonneg, nonpos));
  }
  r.selected = benjamini_hochberg(r.tail_probability, q);
  return r;
}

// ---------------------------------------------------------------------------
// Forecasting and reproducibility

struct ForecastError {
  std::vector<double> per_step;
  double pooled = 0.0;
};

/// Per-horizon ||pred_h - actual_h||_2 / ||actual_h||_2 and the same ratio
/// pooled over the whole block.
inline ForecastError forecast_error(const Matrix& predicted, const Matrix& actual) {
  if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols())
    throw ShapeError("forecast and holdout shapes differ");
  ForecastError e;
  for (Eigen::Index h = 0; h < actual.cols(); ++h) {
    const double den = actual.col(h).norm();
    if (!(den > 0.0)) throw DomainError("holdout column " + std::to_string(h + 1) + " is zero");
    e.per_step.push_back((predicted.col(h) - actual.col(h)).norm() / den);
  }
  e.pooled = (predicted - actual).norm() / actual.norm();
  return e;
}

/// Pearson correlation of each (subject, row) between two fits; subjects
/// outer, rows inner. Zero-variance rows give nullopt.
inline std::vector<std::optional<double>> reproducibility_correlation(const std::vector<Matrix>& fitA,
                                                                      const std::vector<Matrix>& fitB) {
  if (fitA.size() != fitB.size()) throw ShapeError("fits cover different subject counts");
  std::vector<std::optional<double>> out;
  for (std::size_t i = 0; i < fitA.size(); ++i) {
    if (fitA[i].rows() != fitB[i].rows() || fitA[i].cols() != fitB[i].cols())
      throw ShapeError("fits have different shapes");
    for (Eigen::Index d = 0; d < fitA[i].rows(); ++d) {
      const Vector a = fitA[i].row(d).transpose().array() - fitA[i].row(d).mean();
      const Vector b = fitB[i].row(d).transpose().array() - fitB[i].row(d).mean();
      const double den = a.norm() * b.norm();
      if (den > 0.0) out.emplace_back(a.dot(b) / den);
      else out.emplace_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace pdpm
