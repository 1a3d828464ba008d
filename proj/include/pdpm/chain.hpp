#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "pdpm/dp_engine.hpp"
#include "pdpm/model.hpp"
#include "pdpm/samplers.hpp"

namespace pdpm {

/// One stored sweep. Everything is subject-level (label invariant) except
/// the assignment vectors, which are stored in canonical first-appearance
/// order.
struct DrawRecord {
  std::vector<Matrix> coefficients;  // per subject, D x DK
  std::vector<Matrix> loadings;      // per subject, identified Gamma (D x B)
  std::vector<Vector> idio_var;      // per subject, diagonal of Omega
  AssignmentVector cov_labels;
  std::vector<AssignmentVector> axis_labels;
  std::vector<double> lambda2;
  double loglik = 0.0;

  Matrix subject_sigma(std::size_t i) const {
    Matrix S = loadings[i] * loadings[i].transpose();
    S.diagonal() += idio_var[i];
    return S;
  }
};

struct DrawsHeader {
  Variant variant = Variant::pdpm;
  std::size_t subjects = 0;
  Eigen::Index D = 0;
  int K = 0, B = 0;
  std::size_t axes = 0;
};

struct PosteriorDraws {
  DrawsHeader header;
  std::vector<DrawRecord> records;
};

/// Subjects sharing row d of the assembled coefficients in one draw: the
/// product partition of every axis that owns part of that row.
inline AssignmentVector row_partition(const DrawsHeader& h, const DrawRecord& r, Eigen::Index d) {
  const auto layout = axis_layout(h.variant, h.D, h.K);
  AssignmentVector lab(h.subjects, 0);
  long base = 1;
  for (std::size_t j = 0; j < layout.size(); ++j) {
    if (!layout[j].covers_row(d)) continue;
    int C = 0;
    for (int l : r.axis_labels[j]) C = std::max(C, l + 1);
    for (std::size_t i = 0; i < h.subjects; ++i) lab[i] += static_cast<int>(base * r.axis_labels[j][i]);
    base *= C;
  }
  return canonical_labels(lab);
}

using DrawSink = std::function<void(const DrawRecord&)>;

// ---------------------------------------------------------------------------
// Initialisation

namespace detail {

/// Lloyd's k-means with k-means++ seeding. Rows of `features` are points.
/// Clusters are returned ordered by decreasing size.
inline AssignmentVector kmeans(const Matrix& features, std::size_t k, Rng& rng, int iterations = 50) {
  const auto n = static_cast<std::size_t>(features.rows());
  k = std::clamp<std::size_t>(k, 1, n);
  AssignmentVector labels(n, 0);
  if (k == 1) return labels;

  std::vector<Eigen::Index> seeds;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  seeds.push_back(static_cast<Eigen::Index>(pick(rng)));
  Vector best = Vector::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    const auto last = features.row(seeds.back());
    for (std::size_t i = 0; i < n; ++i)
      best[static_cast<Eigen::Index>(i)] = std::min(best[static_cast<Eigen::Index>(i)],
                                                    (features.row(static_cast<Eigen::Index>(i)) - last).squaredNorm());
    const double total = best.sum();
    if (!(total > 0.0)) break;  // fewer distinct points than k
    double u = rnd::uniform_open(rng) * total;
    Eigen::Index chosen = static_cast<Eigen::Index>(n) - 1;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      u -= best[i];
      if (u <= 0.0) { chosen = i; break; }
    }
    seeds.push_back(chosen);
  }
  k = seeds.size();
  Matrix centers(static_cast<Eigen::Index>(k), features.cols());
  for (std::size_t c = 0; c < k; ++c) centers.row(static_cast<Eigen::Index>(c)) = features.row(seeds[c]);

  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index arg = 0;
      (centers.rowwise() - features.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&arg);
      if (labels[i] != static_cast<int>(arg)) { labels[i] = static_cast<int>(arg); changed = true; }
    }
    Matrix sums = Matrix::Zero(centers.rows(), centers.cols());
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(labels[i]) += features.row(static_cast<Eigen::Index>(i));
      ++count[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (count[c] > 0) centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(count[c]);
    if (!changed && it > 0) break;
  }

  // Relabel by decreasing size (ties by first appearance), dropping empties.
  std::vector<std::size_t> count(k, 0);
  for (int l : labels) ++count[static_cast<std::size_t>(l)];
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return count[a] > count[b]; });
  std::vector<int> rank(k, -1);
  for (std::size_t r = 0; r < k; ++r)
    if (count[order[r]] > 0) rank[order[r]] = static_cast<int>(r);
  for (int& l : labels) l = rank[static_cast<std::size_t>(l)];
  return labels;
}

/// Ridge least-squares VAR fit of one subject: W = Sxz (Szz + rho I)^{-1}.
inline Matrix ridge_prefit(const SubjectData& s, double relative_ridge) {
  const Eigen::Index p = s.Szz.rows();
  const double scale = std::max(s.Szz.trace() / static_cast<double>(p), 1e-12);
  Matrix A = s.Szz;
  A.diagonal().array() += relative_ridge * scale + 1e-10;
  return Eigen::LLT<Matrix>(A).solve(s.Sxz.transpose()).transpose();
}

/// Factor-form starting values from a residual covariance: principal
/// components for the loadings, rotated to lower-trapezoidal form, with the
/// remainder on the diagonal.
inline CovarianceAtom factor_start(const Matrix& S, int B) {
  const Eigen::Index D = S.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Vector ev = es.eigenvalues();  // ascending
  const Matrix U = es.eigenvectors();
  const Eigen::Index rest = D - B;
  const double noise = rest > 0 ? std::max(ev.head(rest).mean(), 1e-8) : std::max(0.1 * ev.minCoeff(), 1e-8);
  Matrix G(D, B);
  for (int b = 0; b < B; ++b) {
    const Eigen::Index idx = D - 1 - b;
    G.col(b) = U.col(idx) * std::sqrt(std::max(ev[idx] - noise, 0.0));
  }
  Eigen::HouseholderQR<Matrix> qr(G.transpose());
  Matrix L = Matrix(qr.matrixQR().triangularView<Eigen::Upper>()).transpose();  // D x B
  for (Eigen::Index d = 0; d < D; ++d)
    for (int b = static_cast<int>(d) + 1; b < B; ++b) L(d, b) = 0.0;

  CovarianceAtom a;
  a.loadings_expanded = L;
  a.psi = Vector::Ones(B);
  a.idio_var = (S.diagonal() - (L * L.transpose()).diagonal()).cwiseMax(0.05 * S.diagonal()).cwiseMax(1e-8);
  return a;
}

}  // namespace detail

/// Starting state: per-subject ridge pre-fit, then k-means on each axis's
/// coefficient block (and on residual log-variances/correlations for the
/// covariance axis) into `init_clusters` groups, atoms set to group means.
inline ChainState initialize_chain(const std::vector<SubjectData>& data, const HyperParams& hp, Variant variant,
                                   Rng rng) {
  if (data.empty()) throw ConfigError("dataset", "needs at least one subject");
  const Eigen::Index D = data.front().X.rows();
  hp.validate(D);
  const std::size_t n = data.size();
  ChainState st;
  st.variant = variant;
  st.D = D;
  st.K = hp.K;
  st.B = hp.factors_for(D);
  st.rng = std::move(rng);

  std::size_t k0 = hp.init_clusters > 0 ? static_cast<std::size_t>(hp.init_clusters)
                                        : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  k0 = std::min(k0, n);
  const std::size_t a_k0 = hp.max_A_components > 0 ? std::min<std::size_t>(k0, static_cast<std::size_t>(hp.max_A_components)) : k0;
  const std::size_t c_k0 = hp.max_cov_components > 0 ? std::min<std::size_t>(k0, static_cast<std::size_t>(hp.max_cov_components)) : k0;

  std::vector<Matrix> W0(n), S0(n);
  for (std::size_t i = 0; i < n; ++i) {
    W0[i] = detail::ridge_prefit(data[i], hp.ridge);
    S0[i] = residual_scatter(W0[i], data[i]) / static_cast<double>(data[i].scans());
    S0[i].diagonal().array() += 1e-8;
  }

  const double lambda2 = hp.lasso_r / hp.lasso_delta;
  for (const auto& blk : axis_layout(variant, D, hp.K)) {
    AutocovAxis ax;
    ax.block = blk;
    ax.lambda2 = lambda2;
    ax.tau2 = Matrix::Constant(blk.rows, blk.cols, 2.0 / lambda2);
    Matrix feats(static_cast<Eigen::Index>(n), blk.rows * blk.cols);
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix b = W0[i].block(blk.row0, blk.col0, blk.rows, blk.cols);
      feats.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(b.data(), b.size()).transpose();
    }
    ax.labels = detail::kmeans(feats, a_k0, st.rng);
    const std::size_t C = static_cast<std::size_t>(*std::max_element(ax.labels.begin(), ax.labels.end()) + 1);
    ax.atoms.assign(C, Matrix::Zero(blk.rows, blk.cols));
    std::vector<double> count(C, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ax.atoms[static_cast<std::size_t>(ax.labels[i])] += W0[i].block(blk.row0, blk.col0, blk.rows, blk.cols);
      count[static_cast<std::size_t>(ax.labels[i])] += 1.0;
    }
    for (std::size_t c = 0; c < C; ++c) ax.atoms[c] /= count[c];
    ax.sticks.alpha = hp.alpha_A;
    st.axes.push_back(std::move(ax));
  }

  // Residual-covariance features: log variances and correlations.
  const Eigen::Index nf = D + D * (D - 1) / 2;
  Matrix feats(static_cast<Eigen::Index>(n), nf);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector sd = S0[i].diagonal().cwiseSqrt();
    Eigen::Index f = 0;
    for (Eigen::Index d = 0; d < D; ++d) feats(static_cast<Eigen::Index>(i), f++) = std::log(S0[i](d, d));
    for (Eigen::Index a = 0; a < D; ++a)
      for (Eigen::Index b = a + 1; b < D; ++b) feats(static_cast<Eigen::Index>(i), f++) = S0[i](a, b) / (sd[a] * sd[b]);
  }
  st.cov.labels = detail::kmeans(feats, c_k0, st.rng);
  st.cov.sticks.alpha = hp.alpha_cov;
  const std::size_t C = static_cast<std::size_t>(*std::max_element(st.cov.labels.begin(), st.cov.labels.end()) + 1);
  for (std::size_t c = 0; c < C; ++c) {
    Matrix S = Matrix::Zero(D, D);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<std::size_t>(st.cov.labels[i]) == c) { S += S0[i]; m += 1.0; }
    st.cov.atoms.push_back(detail::factor_start(S / m, st.B));
  }

  st.factors.resize(n);
  st.Sez.resize(n);
  st.Sex.resize(n);
  st.See.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    st.factors[i] = Matrix::Zero(st.B, data[i].scans());
    refresh_factor_stats(st, data[i], i);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Records and the driver

inline double chain_loglik(const ChainState& st, const std::vector<SubjectData>& data) {
  std::vector<CovCache> cache;
  for (const auto& a : st.cov.atoms) cache.push_back(make_cov_cache(a));
  double ll = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    ll += subject_loglik(st.subject_coefficients(i), data[i], cache[static_cast<std::size_t>(st.cov.labels[i])]);
  return ll;
}

inline DrawRecord make_record(const ChainState& st, const std::vector<SubjectData>& data) {
  DrawRecord r;
  const std::size_t n = st.subjects();
  std::vector<LowRankCovariance> ident;
  for (const auto& a : st.cov.atoms) ident.push_back(identify_expanded_params(a));
  for (std::size_t i = 0; i < n; ++i) {
    r.coefficients.push_back(st.subject_coefficients(i));
    const auto& c = ident[static_cast<std::size_t>(st.cov.labels[i])];
    r.loadings.push_back(c.loadings);
    r.idio_var.push_back(c.idio_var);
  }
  r.cov_labels = canonical_labels(st.cov.labels);
  for (const auto& ax : st.axes) {
    r.axis_labels.push_back(canonical_labels(ax.labels));
    r.lambda2.push_back(ax.lambda2);
  }
  r.loglik = chain_loglik(st, data);
  if (!std::isfinite(r.loglik)) throw NumericalError("non-finite log-likelihood");
  return r;
}

inline DrawsHeader draws_header(const ChainState& st) {
  return DrawsHeader{st.variant, st.subjects(), st.D, st.K, st.B, st.axes.size()};
}

inline std::vector<SubjectData> prepare_data(const std::vector<SubjectPanel>& panels, int K) {
  if (panels.empty()) throw ConfigError("dataset", "needs at least one subject");
  const Eigen::Index D = panels.front().dim();
  std::vector<SubjectData> data;
  data.reserve(panels.size());
  for (const auto& p : panels) {
    if (p.dim() != D) throw ShapeError("subject '" + p.id + "' has " + std::to_string(p.dim()) + " rows, expected " + std::to_string(D));
    if (p.scans() < 2) throw ShapeError("subject '" + p.id + "' needs at least 2 scans");
    if (!p.data.allFinite()) throw ShapeError("subject '" + p.id + "' has non-finite entries");
    data.push_back(SubjectData::from_panel(p, K));
  }
  return data;
}

/// burn_in + n_iter sweeps; every thin-th post-burn-in sweep goes to `sink`.
/// Returns the header describing the records.
inline DrawsHeader run_chain(const std::vector<SubjectPanel>& panels, const HyperParams& hp, Variant variant,
                             std::uint64_t seed, const DrawSink& sink) {
  if (!panels.empty()) hp.validate(panels.front().dim());
  const auto data = prepare_data(panels, hp.K);
  ChainState st = initialize_chain(data, hp, variant, make_rng(seed));
  const DrawsHeader header = draws_header(st);
  const std::size_t total = static_cast<std::size_t>(hp.burn_in) + static_cast<std::size_t>(hp.n_iter);
  for (std::size_t s = 1; s <= total; ++s) {
    try {
      gibbs_sweep(st, data, hp);
      if (s > static_cast<std::size_t>(hp.burn_in) && (s - static_cast<std::size_t>(hp.burn_in)) % static_cast<std::size_t>(hp.thin) == 0)
        sink(make_record(st, data));
    } catch (const NumericalError& e) {
      throw ChainAbort(s, e.what());
    }
  }
  return header;
}

inline PosteriorDraws run_chain(const std::vector<SubjectPanel>& panels, const HyperParams& hp, Variant variant,
                                std::uint64_t seed) {
  PosteriorDraws out;
  out.header = run_chain(panels, hp, variant, seed, [&](const DrawRecord& r) { out.records.push_back(r); });
  return out;
}

}  // namespace pdpm
