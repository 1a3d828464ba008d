#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "pdpm/dp_engine.hpp"
#include "pdpm/model.hpp"
#include "pdpm/random.hpp"

namespace pdpm {

// ---------------------------------------------------------------------------
// Shared helpers

/// sum_t (x_t - W z_t)(x_t - W z_t)'
inline Matrix residual_scatter(const Matrix& W, const SubjectData& s) {
  const Matrix WSzx = W * s.Sxz.transpose();
  return s.Sxx - WSzx - WSzx.transpose() + W * s.Szz * W.transpose();
}

struct CovCache {
  Matrix precision;
  double logdet = 0.0;
};

inline CovCache make_cov_cache(const CovarianceAtom& atom) {
  const Matrix S = atom.dense();
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("cluster covariance is not positive definite");
  CovCache c;
  c.logdet = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  c.precision = llt.solve(Matrix::Identity(S.rows(), S.cols()));
  return c;
}

/// Gaussian VAR log-likelihood from sufficient statistics (eta marginalised).
inline double subject_loglik(const Matrix& W, const SubjectData& s, const CovCache& c) {
  const double T = static_cast<double>(s.scans());
  const double D = static_cast<double>(s.X.rows());
  const double quad = (c.precision.cwiseProduct(residual_scatter(W, s))).sum();
  return -0.5 * (T * (D * std::log(2.0 * std::numbers::pi) + c.logdet) + quad);
}

/// Draw a residual-covariance atom from the base measure: N(0,1) expanded
/// loadings on and below the diagonal, Gamma(1/2,1/2) factor precisions and
/// Gamma(a_sigma, b_sigma) idiosyncratic precisions.
inline CovarianceAtom draw_cov_atom_prior(Eigen::Index D, int B, const HyperParams& hp, Rng& rng) {
  CovarianceAtom a;
  a.loadings_expanded = Matrix::Zero(D, B);
  for (Eigen::Index d = 0; d < D; ++d)
    for (Eigen::Index b = 0; b <= std::min<Eigen::Index>(d, B - 1); ++b)
      a.loadings_expanded(d, b) = rnd::normal(rng);
  a.psi.resize(B);
  for (int b = 0; b < B; ++b) a.psi[b] = 1.0 / rnd::gamma(rng, 0.5, 0.5);
  a.idio_var.resize(D);
  for (Eigen::Index d = 0; d < D; ++d) a.idio_var[d] = 1.0 / rnd::gamma(rng, hp.a_sigma, hp.b_sigma);
  return a;
}

inline Matrix draw_autocov_atom_prior(const AutocovAxis& ax, Rng& rng) {
  Matrix a(ax.block.rows, ax.block.cols);
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = std::sqrt(ax.tau2(r, c)) * rnd::normal(rng);
  return a;
}

inline void refresh_factor_stats(ChainState& st, const SubjectData& s, std::size_t i) {
  const Matrix& E = st.factors[i];
  st.Sez[i] = E * s.Z.transpose();
  st.Sex[i] = E * s.X.transpose();
  st.See[i] = E * E.transpose();
}

/// Identified loadings Gamma = Gamma* diag(sign(Gamma*_bb) psi_b^{1/2}).
inline LowRankCovariance identify_expanded_params(const CovarianceAtom& atom) {
  if ((atom.psi.array() <= 0.0).any()) throw DomainError("psi must be positive");
  LowRankCovariance out{atom.loadings_expanded, atom.idio_var};
  for (Eigen::Index b = 0; b < atom.psi.size(); ++b) {
    const double diag = atom.loadings_expanded(b, b);
    const double sign = diag < 0.0 ? -1.0 : 1.0;
    out.loadings.col(b) *= sign * std::sqrt(atom.psi[b]);
  }
  return out;
}

/// Matching transform of working factors: eta_b = sign(Gamma*_bb) psi_b^{-1/2} eta*_b.
inline Matrix identify_factors(const CovarianceAtom& atom, const Matrix& factors) {
  Matrix out = factors;
  for (Eigen::Index b = 0; b < atom.psi.size(); ++b) {
    const double sign = atom.loadings_expanded(b, b) < 0.0 ? -1.0 : 1.0;
    out.row(b) *= sign / std::sqrt(atom.psi[b]);
  }
  return out;
}

namespace detail {

template <class Atom, class Draw>
void extend_axis(AssignmentVector& labels, StickState& sticks, SliceVariables& slice,
                 std::vector<Atom>& atoms, double alpha, int cap, Rng& rng, Draw&& draw_prior) {
  sticks = update_sticks(labels, alpha, rng);
  atoms.resize(std::min(atoms.size(), sticks.sticks.size()));
  const auto w = weights_from_sticks(sticks, sticks.sticks.size());
  slice = sample_slice(labels, w, rng);
  const std::size_t H = required_components(slice, sticks, rng, static_cast<std::size_t>(cap));
  if (atoms.size() > H) atoms.resize(H);
  while (atoms.size() < H) atoms.push_back(draw_prior());
}

inline std::vector<std::size_t> scans_per_cluster(const ChainState& st,
                                                  const std::vector<SubjectData>& data) {
  std::vector<std::size_t> N(st.cov.atoms.size(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) N[static_cast<std::size_t>(st.cov.labels[i])] += data[i].scans();
  return N;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Residual-covariance block

/// Slice-sampled reassignment of subjects to covariance clusters using the
/// full-panel residual likelihood (latent factors marginalised).
inline void update_cov_assignments(ChainState& st, const std::vector<SubjectData>& data,
                                   const HyperParams& hp) {
  auto& ax = st.cov;
  if (hp.max_cov_components == 1) {
    std::fill(ax.labels.begin(), ax.labels.end(), 0);
    ax.atoms.resize(1);
    return;
  }
  detail::extend_axis(ax.labels, ax.sticks, ax.slice, ax.atoms, hp.alpha_cov, hp.max_cov_components,
                      st.rng, [&] { return draw_cov_atom_prior(st.D, st.B, hp, st.rng); });
  const std::size_t H = ax.atoms.size();
  std::vector<CovCache> cache;
  cache.reserve(H);
  for (const auto& a : ax.atoms) cache.push_back(make_cov_cache(a));
  const auto w = weights_from_sticks(ax.sticks, H);

  std::vector<double> ll(H);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Matrix W = st.subject_coefficients(i);
    const Matrix R = residual_scatter(W, data[i]);
    const double T = static_cast<double>(data[i].scans());
    for (std::size_t h = 0; h < H; ++h)
      ll[h] = (ax.slice[i] < w[h]) ? -0.5 * (T * cache[h].logdet + cache[h].precision.cwiseProduct(R).sum())
                                   : 0.0;
    ax.labels[i] = sample_assignment(ll, ax.slice[i], w, st.rng);
  }
}

/// eta*_t | - ~ N(Q^{-1} Gamma*' Omega^{-1} r_t, Q^{-1}), Q = Psi^{-1} + Gamma*' Omega^{-1} Gamma*.
inline void update_latent_factors(ChainState& st, const std::vector<SubjectData>& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& atom = st.subject_cov(i);
    const Matrix& G = atom.loadings_expanded;
    const Vector omega_inv = atom.idio_var.cwiseInverse();
    const Matrix GtOi = G.transpose() * omega_inv.asDiagonal();  // B x D
    Matrix Q = GtOi * G;
    Q.diagonal() += atom.psi.cwiseInverse();
    Eigen::LLT<Matrix> llt(Q);
    if (llt.info() != Eigen::Success) throw NumericalError("latent-factor precision is not positive definite");

    const Matrix W = st.subject_coefficients(i);
    const Matrix R = data[i].X - W * data[i].Z;
    Matrix E = llt.solve(GtOi * R);
    const Eigen::Index T = data[i].scans();
    Matrix xi(st.B, T);
    for (Eigen::Index t = 0; t < T; ++t)
      for (int b = 0; b < st.B; ++b) xi(b, t) = rnd::normal(st.rng);
    E += llt.matrixU().solve(xi);
    st.factors[i] = std::move(E);
    refresh_factor_stats(st, data[i], i);
  }
}

/// Row d of Gamma*_h: only the first min(d+1, B) entries are free.
inline void update_factor_loadings(ChainState& st, const std::vector<SubjectData>& data) {
  const std::size_t H = st.cov.atoms.size();
  std::vector<Matrix> W(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) W[i] = st.subject_coefficients(i);
  for (std::size_t h = 0; h < H; ++h) {
    auto& atom = st.cov.atoms[h];
    for (Eigen::Index d = 0; d < st.D; ++d) {
      const Eigen::Index m = std::min<Eigen::Index>(d + 1, st.B);
      const double prec = 1.0 / atom.idio_var[d];
      Matrix Q = Matrix::Identity(m, m);
      Vector b = Vector::Zero(m);
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (static_cast<std::size_t>(st.cov.labels[i]) != h) continue;
        Q += prec * st.See[i].topLeftCorner(m, m);
        b += prec * (st.Sex[i].col(d).head(m) - st.Sez[i].topRows(m) * W[i].row(d).transpose());
      }
      const Vector g = rnd::gaussian_from_precision(st.rng, Q, b);
      atom.loadings_expanded.row(d).setZero();
      atom.loadings_expanded.row(d).head(m) = g.transpose();
    }
  }
}

/// psi_b^{-1} | - ~ Gamma((1 + N_h)/2, (1 + sum eta*_b^2)/2); psi stores the variance.
inline void update_psi(ChainState& st, const std::vector<SubjectData>& data) {
  const auto N = detail::scans_per_cluster(st, data);
  for (std::size_t h = 0; h < st.cov.atoms.size(); ++h) {
    auto& atom = st.cov.atoms[h];
    for (int b = 0; b < st.B; ++b) {
      double ss = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (static_cast<std::size_t>(st.cov.labels[i]) == h) ss += st.See[i](b, b);
      const double precision = rnd::gamma(st.rng, 0.5 * (1.0 + static_cast<double>(N[h])), 0.5 * (1.0 + ss));
      atom.psi[b] = 1.0 / precision;
    }
  }
}

/// sigma_d^{-2} | - ~ Gamma(a + N_h/2, b + RSS_d/2), residuals net of the factor term.
inline void update_idio_precision(ChainState& st, const std::vector<SubjectData>& data,
                                  const HyperParams& hp) {
  const auto N = detail::scans_per_cluster(st, data);
  std::vector<Matrix> W(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) W[i] = st.subject_coefficients(i);
  for (std::size_t h = 0; h < st.cov.atoms.size(); ++h) {
    auto& atom = st.cov.atoms[h];
    const Matrix& G = atom.loadings_expanded;
    for (Eigen::Index d = 0; d < st.D; ++d) {
      double rss = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (static_cast<std::size_t>(st.cov.labels[i]) != h) continue;
        const auto& s = data[i];
        const Vector w = W[i].row(d).transpose();
        const Vector g = G.row(d).transpose();
        double yy = s.Sxx(d, d) - 2.0 * s.Sxz.row(d).dot(w) + w.dot(s.Szz * w);
        const Vector ey = st.Sex[i].col(d) - st.Sez[i] * w;
        rss += yy - 2.0 * g.dot(ey) + g.dot(st.See[i] * g);
      }
      rss = std::max(rss, 0.0);
      const double precision =
          rnd::gamma(st.rng, hp.a_sigma + 0.5 * static_cast<double>(N[h]), hp.b_sigma + 0.5 * rss);
      atom.idio_var[d] = 1.0 / precision;
    }
  }
}

// ---------------------------------------------------------------------------
// Autocovariance block

namespace detail {

/// 0.5 b'Q^{-1}b - 0.5 log|Q|, the Q-dependent part of a Gaussian evidence.
inline double collapsed_score(const Matrix& Q, const Vector& b) {
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() != Eigen::Success) throw NumericalError("autocovariance row precision is not positive definite");
  const Vector v = llt.matrixL().solve(b);
  return 0.5 * v.squaredNorm() - llt.matrixLLT().diagonal().array().log().sum();
}

/// Random split/merge Metropolis-Hastings moves on collapsed labels with the
/// sticks and slices held fixed, so the target is prod_i 1(u_i < w_{z_i})
/// times the product of cluster evidences. An ordered pair (i, j) is drawn;
/// if they share a cluster, j and a fair-coin half of the rest move to an
/// empty component picked uniformly, otherwise j's cluster joins i's.
inline void split_merge(AssignmentVector& labels, const SliceVariables& slice, const std::vector<double>& w,
                        const std::vector<Matrix>& M, const std::vector<Vector>& b, const Vector& prior,
                        int attempts, Rng& rng) {
  const std::size_t n = labels.size(), H = w.size();
  if (n < 2 || attempts <= 0) return;
  const Eigen::Index p = prior.size();
  const double empty_score = collapsed_score(Matrix(prior.asDiagonal()), Vector::Zero(p));
  auto evidence = [&](const std::vector<std::size_t>& members) {
    Matrix Q = prior.asDiagonal();
    Vector lin = Vector::Zero(p);
    for (std::size_t k : members) {
      Q += M[k];
      lin += b[k];
    }
    return collapsed_score(Q, lin) - empty_score;
  };
  std::uniform_int_distribution<std::size_t> pick(0, n - 1), pick_other(0, n - 2);
  for (int a = 0; a < attempts; ++a) {
    const std::size_t i = pick(rng);
    std::size_t j = pick_other(rng);
    if (j >= i) ++j;
    const int ci = labels[i], cj = labels[j];
    std::vector<char> occupied(H, 0);
    for (int l : labels) occupied[static_cast<std::size_t>(l)] = 1;
    std::vector<std::size_t> empty;
    for (std::size_t h = 0; h < H; ++h)
      if (!occupied[h]) empty.push_back(h);
    if (ci == cj) {
      if (empty.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick_empty(0, empty.size() - 1);
      const auto target = static_cast<int>(empty[pick_empty(rng)]);
      std::vector<std::size_t> all, stay, go;
      for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] != ci) continue;
        all.push_back(k);
        if (k == i) stay.push_back(k);
        else if (k == j || rnd::uniform_open(rng) < 0.5) go.push_back(k);
        else stay.push_back(k);
      }
      bool admissible = true;
      for (std::size_t k : go) admissible = admissible && slice[k] < w[static_cast<std::size_t>(target)];
      if (!admissible) continue;
      const double log_ratio = evidence(stay) + evidence(go) - evidence(all) + std::log(static_cast<double>(empty.size())) +
                               static_cast<double>(all.size() - 2) * std::log(2.0);
      if (std::log(rnd::uniform_open(rng)) < log_ratio)
        for (std::size_t k : go) labels[k] = target;
    } else {
      std::vector<std::size_t> keep, moved, all;
      for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == ci) keep.push_back(k);
        else if (labels[k] == cj) moved.push_back(k);
        else continue;
        all.push_back(k);
      }
      bool admissible = true;
      for (std::size_t k : moved) admissible = admissible && slice[k] < w[static_cast<std::size_t>(ci)];
      if (!admissible) continue;
      // After the merge cj is empty too.
      const double log_ratio = evidence(all) - evidence(keep) - evidence(moved) -
                               std::log(static_cast<double>(empty.size() + 1)) -
                               static_cast<double>(all.size() - 2) * std::log(2.0);
      if (std::log(rnd::uniform_open(rng)) < log_ratio)
        for (std::size_t k : moved) labels[k] = ci;
    }
  }
}

}  // namespace detail

/// Update one autocovariance axis with the latent factors marginalised and
/// every other axis fixed. With the rows R and columns C of the axis block,
/// the subject log-likelihood in the block coefficients B is
///   vec(B)' vec(G) - 1/2 vec(B)' (Szz_CC kron P_RR) vec(B),
/// G = [P (Sxz - W_other Szz)]_RC and P = Sigma^{-1}.
///
/// Blocks with at most `hp.collapse_limit` coefficients integrate the atoms
/// out of the label update (each unit is scored by the predictive of its
/// cluster-mates, so redundant clusters can empty) and then redraw the atoms
/// from their joint Normal conditional; the return value is true. Before the
/// scan, `hp.split_merge` split/merge proposals move whole groups at once.
/// Larger blocks score labels against the current atoms and return false,
/// leaving the atom draw to the row-wise update after the factors are
/// refreshed.
inline bool update_autocov_axis(ChainState& st, const std::vector<SubjectData>& data, const HyperParams& hp,
                                std::size_t j, const std::vector<CovCache>& cache) {
  const std::size_t n = data.size();
  auto& ax = st.axes[j];
  const AxisBlock blk = ax.block;
  const Eigen::Index p = blk.rows * blk.cols;
  const bool collapse = p <= hp.collapse_limit;
  const bool fixed = hp.max_A_components == 1;
  if (fixed) {
    std::fill(ax.labels.begin(), ax.labels.end(), 0);
    ax.atoms.resize(1);
    if (!collapse) return false;
  } else {
    detail::extend_axis(ax.labels, ax.sticks, ax.slice, ax.atoms, hp.alpha_A, hp.max_A_components, st.rng,
                        [&] { return draw_autocov_atom_prior(ax, st.rng); });
  }
  const std::size_t H = ax.atoms.size();

  std::vector<Matrix> G(n);
  std::vector<Matrix> PRR(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data[i];
    const Matrix& P = cache[static_cast<std::size_t>(st.cov.labels[i])].precision;
    Matrix Wother = st.subject_coefficients(i);
    Wother.block(blk.row0, blk.col0, blk.rows, blk.cols).setZero();
    const Matrix full = P * (s.Sxz - Wother * s.Szz);
    G[i] = full.block(blk.row0, blk.col0, blk.rows, blk.cols);
    PRR[i] = P.block(blk.row0, blk.row0, blk.rows, blk.rows);
  }

  if (!collapse) {
    const auto w = weights_from_sticks(ax.sticks, H);
    std::vector<double> ll(H);
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix Szz = data[i].Szz.block(blk.col0, blk.col0, blk.cols, blk.cols);
      for (std::size_t h = 0; h < H; ++h) {
        if (!(ax.slice[i] < w[h])) { ll[h] = 0.0; continue; }
        const Matrix& A = ax.atoms[h];
        ll[h] = A.cwiseProduct(G[i]).sum() - 0.5 * (PRR[i] * A * Szz).cwiseProduct(A).sum();
      }
      ax.labels[i] = sample_assignment(ll, ax.slice[i], w, st.rng);
    }
    return false;
  }

  std::vector<Matrix> M(n);
  std::vector<Vector> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    M[i] = Eigen::kroneckerProduct(data[i].Szz.block(blk.col0, blk.col0, blk.cols, blk.cols), PRR[i]);
    b[i] = Eigen::Map<const Vector>(G[i].data(), p);
  }
  const Vector prior = Eigen::Map<const Vector>(ax.tau2.data(), p).cwiseInverse();
  std::vector<Matrix> Q(H, Matrix::Zero(p, p));
  std::vector<Vector> lin(H, Vector::Zero(p));
  std::vector<double> score(H, 0.0);
  std::vector<char> fresh(H, 0);
  for (std::size_t h = 0; h < H; ++h) Q[h].diagonal() = prior;
  if (!fixed)
    detail::split_merge(ax.labels, ax.slice, weights_from_sticks(ax.sticks, H), M, b, prior, hp.split_merge, st.rng);
  auto move = [&](std::size_t i, std::size_t h, double sign) {
    Q[h] += sign * M[i];
    lin[h] += sign * b[i];
    fresh[h] = 0;
  };
  for (std::size_t i = 0; i < n; ++i) move(i, static_cast<std::size_t>(ax.labels[i]), 1.0);

  if (!fixed) {
    const auto w = weights_from_sticks(ax.sticks, H);
    std::vector<double> ll(H);
    for (std::size_t i = 0; i < n; ++i) {
      move(i, static_cast<std::size_t>(ax.labels[i]), -1.0);
      for (std::size_t h = 0; h < H; ++h) {
        if (!(ax.slice[i] < w[h])) { ll[h] = 0.0; continue; }
        if (!fresh[h]) {
          score[h] = detail::collapsed_score(Q[h], lin[h]);
          fresh[h] = 1;
        }
        ll[h] = detail::collapsed_score(Q[h] + M[i], lin[h] + b[i]) - score[h];
      }
      ax.labels[i] = sample_assignment(ll, ax.slice[i], w, st.rng);
      move(i, static_cast<std::size_t>(ax.labels[i]), 1.0);
    }
  }

  for (std::size_t h = 0; h < H; ++h) {
    const Vector draw = rnd::gaussian_from_precision(st.rng, Q[h], lin[h]);
    ax.atoms[h] = Eigen::Map<const Matrix>(draw.data(), blk.rows, blk.cols);
  }
  return true;
}

namespace detail {

struct RowBlock {
  std::size_t axis;    // index into st.axes
  std::size_t atom;    // component within that axis
  Eigen::Index local;  // row inside the axis block
};

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace detail

/// Row-wise Normal full conditionals for all autocovariance atoms. For each
/// output row the coefficient blocks that co-occur in some subject form one
/// joint Gaussian (lag clustering couples lags); independent groups are
/// drawn separately. Responses are net of the factor contribution.
inline void update_autocov_atoms(ChainState& st, const std::vector<SubjectData>& data) {
  const std::size_t n = data.size();
  for (Eigen::Index d = 0; d < st.D; ++d) {
    std::vector<detail::RowBlock> blocks;
    std::vector<std::size_t> first_block(st.axes.size(), 0);
    std::vector<std::size_t> touching;
    for (std::size_t j = 0; j < st.axes.size(); ++j) {
      const auto& ax = st.axes[j];
      if (!ax.block.covers_row(d)) continue;
      touching.push_back(j);
      first_block[j] = blocks.size();
      for (std::size_t h = 0; h < ax.atoms.size(); ++h) blocks.push_back({j, h, d - ax.block.row0});
    }
    if (blocks.empty()) continue;

    std::vector<std::size_t> parent(blocks.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a0 = first_block[touching[0]] + static_cast<std::size_t>(st.axes[touching[0]].labels[i]);
      for (std::size_t t = 1; t < touching.size(); ++t) {
        const std::size_t a1 = first_block[touching[t]] + static_cast<std::size_t>(st.axes[touching[t]].labels[i]);
        parent[detail::find_root(parent, a1)] = detail::find_root(parent, a0);
      }
    }

    // Components in order of their smallest block, blocks in index order.
    std::vector<std::vector<std::size_t>> groups;
    std::vector<long> group_of_root(blocks.size(), -1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::size_t r = detail::find_root(parent, b);
      if (group_of_root[r] < 0) {
        group_of_root[r] = static_cast<long>(groups.size());
        groups.emplace_back();
      }
      groups[static_cast<std::size_t>(group_of_root[r])].push_back(b);
    }

    for (const auto& grp : groups) {
      std::vector<Eigen::Index> offset(blocks.size(), -1);
      Eigen::Index dim = 0;
      for (std::size_t b : grp) {
        offset[b] = dim;
        dim += st.axes[blocks[b].axis].block.cols;
      }
      Matrix Q = Matrix::Zero(dim, dim);
      Vector lin = Vector::Zero(dim);
      for (std::size_t b : grp) {
        const auto& ax = st.axes[blocks[b].axis];
        Q.diagonal().segment(offset[b], ax.block.cols) += ax.tau2.row(blocks[b].local).transpose().cwiseInverse();
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b0 = first_block[touching[0]] + static_cast<std::size_t>(st.axes[touching[0]].labels[i]);
        if (offset[b0] < 0) continue;  // subject's blocks live in another group
        const auto& s = data[i];
        const auto& atom = st.subject_cov(i);
        const double prec = 1.0 / atom.idio_var[d];
        const Vector y = s.Sxz.row(d).transpose() - st.Sez[i].transpose() * atom.loadings_expanded.row(d).transpose();
        for (std::size_t p : touching) {
          const auto& bp = st.axes[p].block;
          const std::size_t ip = first_block[p] + static_cast<std::size_t>(st.axes[p].labels[i]);
          lin.segment(offset[ip], bp.cols) += prec * y.segment(bp.col0, bp.cols);
          for (std::size_t q : touching) {
            const auto& bq = st.axes[q].block;
            const std::size_t iq = first_block[q] + static_cast<std::size_t>(st.axes[q].labels[i]);
            Q.block(offset[ip], offset[iq], bp.cols, bq.cols) += prec * s.Szz.block(bp.col0, bq.col0, bp.cols, bq.cols);
          }
        }
      }
      const Vector draw = rnd::gaussian_from_precision(st.rng, Q, lin);
      for (std::size_t b : grp) {
        auto& ax = st.axes[blocks[b].axis];
        ax.atoms[blocks[b].atom].row(blocks[b].local) = draw.segment(offset[b], ax.block.cols).transpose();
      }
    }
  }
}

/// tau^{-2} ~ InverseGaussian(sqrt(lambda^2 / (C Abar^2)), lambda^2), with
/// Abar the slot average over the C occupied clusters of the axis.
inline void update_tau2(ChainState& st) {
  for (auto& ax : st.axes) {
    std::vector<char> used(ax.atoms.size(), 0);
    for (int l : ax.labels) used[static_cast<std::size_t>(l)] = 1;
    const double C = static_cast<double>(std::count(used.begin(), used.end(), 1));
    Matrix mean = Matrix::Zero(ax.block.rows, ax.block.cols);
    for (std::size_t h = 0; h < ax.atoms.size(); ++h)
      if (used[h]) mean += ax.atoms[h];
    mean /= C;
    for (Eigen::Index c = 0; c < ax.tau2.cols(); ++c)
      for (Eigen::Index r = 0; r < ax.tau2.rows(); ++r) {
        const double abar2 = std::max(mean(r, c) * mean(r, c), 1e-12);
        const double mu = std::sqrt(ax.lambda2 / (C * abar2));
        ax.tau2(r, c) = 1.0 / rnd::inverse_gaussian(st.rng, mu, ax.lambda2);
      }
  }
}

/// lambda^2 ~ Gamma(#slots + r, delta + sum tau^2 / 2) per axis.
inline void update_lambda2(ChainState& st, const HyperParams& hp) {
  for (auto& ax : st.axes) {
    const double slots = static_cast<double>(ax.tau2.size());
    ax.lambda2 = rnd::gamma(st.rng, slots + hp.lasso_r, hp.lasso_delta + 0.5 * ax.tau2.sum());
  }
}

/// Drop components above the largest occupied label on every axis.
inline void trim_components(ChainState& st) {
  auto trim = [](auto& atoms, const AssignmentVector& labels, StickState& sticks) {
    const int top = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    const auto keep = static_cast<std::size_t>(top + 1);
    if (atoms.size() > keep) atoms.resize(keep);
    if (sticks.sticks.size() > keep) sticks.sticks.resize(keep);
  };
  trim(st.cov.atoms, st.cov.labels, st.cov.sticks);
  for (auto& ax : st.axes) trim(ax.atoms, ax.labels, ax.sticks);
}

/// True when some output row is owned by more than one axis (lag
/// clustering with K > 1), so that a joint row update adds mixing.
inline bool axes_share_rows(const ChainState& st) {
  for (Eigen::Index d = 0; d < st.D; ++d) {
    int owners = 0;
    for (const auto& ax : st.axes) owners += ax.block.covers_row(d) ? 1 : 0;
    if (owners > 1) return true;
  }
  return false;
}

/// One full block-Gibbs sweep. Assignments and collapsed atom draws run on
/// the factor-marginalised likelihood; the factors are redrawn from their
/// full conditional before anything conditions on them again.
inline void gibbs_sweep(ChainState& st, const std::vector<SubjectData>& data, const HyperParams& hp) {
  update_cov_assignments(st, data, hp);
  std::vector<CovCache> cache;
  for (const auto& a : st.cov.atoms) cache.push_back(make_cov_cache(a));
  bool all_drawn = true;
  for (std::size_t j = 0; j < st.axes.size(); ++j) all_drawn = update_autocov_axis(st, data, hp, j, cache) && all_drawn;
  update_latent_factors(st, data);
  if (!all_drawn || axes_share_rows(st)) update_autocov_atoms(st, data);
  update_factor_loadings(st, data);
  update_psi(st, data);
  update_idio_precision(st, data, hp);
  update_tau2(st);
  update_lambda2(st, hp);
  trim_components(st);
}

}  // namespace pdpm
