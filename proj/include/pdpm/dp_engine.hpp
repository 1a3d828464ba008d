#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "pdpm/errors.hpp"
#include "pdpm/random.hpp"

// Stick-breaking Dirichlet-process machinery with Walker-style slice
// truncation. Labels are 0-based component indices throughout, files
// included.

namespace pdpm {

struct StickState {
  std::vector<double> sticks;
  double alpha = 1.0;
};

using AssignmentVector = std::vector<int>;
using SliceVariables = std::vector<double>;

inline std::vector<double> weights_from_sticks(const StickState& s, std::size_t H) {
  if (H > s.sticks.size())
    throw IndexError("requested " + std::to_string(H) + " weights from " +
                     std::to_string(s.sticks.size()) + " sticks");
  std::vector<double> w(H);
  double remaining = 1.0;
  for (std::size_t h = 0; h < H; ++h) {
    w[h] = s.sticks[h] * remaining;
    remaining *= 1.0 - s.sticks[h];
  }
  return w;
}

/// Mass not covered by the first H components: prod_{h<H} (1 - nu_h).
inline double residual_mass(const StickState& s, std::size_t H) {
  double r = 1.0;
  for (std::size_t h = 0; h < std::min(H, s.sticks.size()); ++h) r *= 1.0 - s.sticks[h];
  return r;
}

inline std::vector<std::size_t> component_counts(std::span<const int> labels, std::size_t H) {
  std::vector<std::size_t> n(H, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= H) throw StateError("label outside instantiated components");
    ++n[static_cast<std::size_t>(l)];
  }
  return n;
}

/// nu_h ~ Beta(1 + n_h, alpha + m_h) for h < H, with n_h the occupancy of h
/// and m_h the number of units labelled above h. H defaults to max label + 1.
inline StickState update_sticks(std::span<const int> labels, double alpha, Rng& rng,
                                std::size_t H = 0) {
  if (!(alpha > 0.0)) throw DomainError("concentration must be positive");
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  H = std::max(H, static_cast<std::size_t>(max_label + 1));
  const auto n = component_counts(labels, H);
  StickState s{std::vector<double>(H), alpha};
  std::size_t above = labels.size();
  for (std::size_t h = 0; h < H; ++h) {
    above -= n[h];
    double nu = rnd::beta(rng, 1.0 + static_cast<double>(n[h]), alpha + static_cast<double>(above));
    // Keep sticks in the open interval; Beta draws can round to 1 when n_h is large.
    s.sticks[h] = std::clamp(nu, std::numeric_limits<double>::min(),
                             1.0 - std::numeric_limits<double>::epsilon());
  }
  return s;
}

/// u_i ~ Uniform(0, pi_{label_i}).
inline SliceVariables sample_slice(std::span<const int> labels, std::span<const double> weights,
                                   Rng& rng) {
  SliceVariables u(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || l >= weights.size() || !(weights[l] > 0.0))
      throw StateError("unit " + std::to_string(i) + " occupies a zero-weight component");
    u[i] = weights[l] * rnd::uniform_open(rng);
  }
  return u;
}

/// Smallest H* with residual mass below min_i u_i, appending fresh
/// Beta(1, alpha) sticks as needed. `cap` (0 = none) bounds the number of
/// components; the sticks vector is trimmed to exactly H*.
inline std::size_t required_components(std::span<const double> u, StickState& s, Rng& rng,
                                       std::size_t cap = 0) {
  double min_u = 1.0;
  for (double x : u) min_u = std::min(min_u, x);
  std::size_t H = 0;
  double residual = 1.0;
  while (residual >= min_u) {
    if (cap != 0 && H >= cap) break;
    if (H == s.sticks.size()) {
      double nu = rnd::beta(rng, 1.0, s.alpha);
      s.sticks.push_back(std::clamp(nu, std::numeric_limits<double>::min(),
                                    1.0 - std::numeric_limits<double>::epsilon()));
    }
    residual *= 1.0 - s.sticks[H];
    ++H;
  }
  s.sticks.resize(H);
  return H;
}

/// Draw a label with probability proportional to 1{u < pi_h} exp(loglik_h).
inline int sample_assignment(std::span<const double> loglik, double u,
                             std::span<const double> weights, Rng& rng) {
  if (loglik.size() > weights.size()) throw ShapeError("more log-likelihoods than weights");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < loglik.size(); ++h)
    if (u < weights[h]) top = std::max(top, loglik[h]);
  if (!std::isfinite(top)) throw StateError("no admissible component for slice value");

  std::vector<double> cdf(loglik.size(), 0.0);
  double total = 0.0;
  for (std::size_t h = 0; h < loglik.size(); ++h) {
    if (u < weights[h]) total += std::exp(loglik[h] - top);
    cdf[h] = total;
  }
  const double draw = rnd::uniform_open(rng) * total;
  for (std::size_t h = 0; h < cdf.size(); ++h)
    if (draw < cdf[h]) return static_cast<int>(h);
  // draw == total only through rounding; fall back to the last admissible one.
  for (std::size_t h = cdf.size(); h-- > 0;)
    if (u < weights[h]) return static_cast<int>(h);
  throw StateError("assignment fell through the CDF");
}

/// Relabel to 0..C-1 in order of first appearance.
inline AssignmentVector canonical_labels(std::span<const int> labels) {
  std::map<int, int> map;
  AssignmentVector out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = map.try_emplace(labels[i], static_cast<int>(map.size())).first->second;
  }
  return out;
}

inline std::size_t occupied_count(std::span<const int> labels) {
  std::vector<int> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

}  // namespace pdpm
