#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pdpm/chain.hpp"
#include "pdpm/errors.hpp"
#include "pdpm/io.hpp"
#include "pdpm/metrics.hpp"
#include "pdpm/simgen.hpp"

// Batch commands. Each cmd_* throws on failure; run_command maps the
// exception type to the process exit code (0 ok, 1 config/usage/shape,
// 2 IO, 3 numerical abort).

namespace pdpm {

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  if (dynamic_cast<const StateError*>(&e)) return 3;
  return 1;
}

template <class F>
int run_command(F&& f, std::ostream& err = std::cerr) {
  try {
    f();
    return 0;
  } catch (const ChainAbort& e) {
    err << "error: numerical abort at sweep " << e.sweep() << ": " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    err << "error: " << e.field() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

/// Thread count: explicit value if positive, else PDPM_THREADS, else 1.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PDPM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("PDPM_THREADS", "must be a positive integer");
    return static_cast<int>(v);
  }
  return 1;
}

inline std::string numbered(const char* prefix, std::size_t k, int width = 0) {
  std::string s = std::to_string(k);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return prefix + s;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

/// Writes out/rep_NNN/{manifest.json, truth.json, subjects/*.csv,
/// holdout/*.csv}. Replicate r draws its truth from stream (seed, 1, r) and
/// subject i of it from (seed, 2, r, i).
inline void cmd_simulate(const SimulateOptions& o) {
  SimConfig cfg = sim_config_from_json(read_json(o.config));
  if (o.seed) cfg.seed = *o.seed;
  for (int r = 1; r <= cfg.replicates; ++r) {
    const fs::path dir = o.out / numbered("rep_", static_cast<std::size_t>(r), 3);
    Rng truth_rng = make_rng(cfg.seed, {1, static_cast<std::uint64_t>(r)});
    const GroundTruth g = gen_truth(cfg, truth_rng);
    DatasetManifest m;
    m.D = cfg.D;
    m.K = cfg.K;
    m.truth = "truth.json";
    for (std::size_t i = 0; i < g.subjects(); ++i) {
      Rng rng = make_rng(cfg.seed, {2, static_cast<std::uint64_t>(r), i});
      std::uniform_int_distribution<std::size_t> pick(0, cfg.T_choices.size() - 1);
      const int T = cfg.T_choices[pick(rng)];
      const auto sim = simulate_panel(g, i, T, cfg.holdout, rng, cfg.burn);
      ManifestEntry e;
      e.id = sim.panel.id;
      e.path = "subjects/" + e.id + ".csv";
      e.T = T;
      write_matrix_csv(dir / e.path, sim.panel.data);
      if (cfg.holdout > 0) {
        e.holdout = "holdout/" + e.id + ".csv";
        write_matrix_csv(dir / e.holdout, sim.holdout);
      }
      m.subjects.push_back(std::move(e));
    }
    write_truth(dir / m.truth, g);
    write_manifest(dir / "manifest.json", m);
  }
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  fs::path manifest;
  std::optional<fs::path> config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  int threads = 0;
  bool standardize = false;
};

struct Standardizer {
  std::vector<Vector> mean, sd;

  static Standardizer fit(const std::vector<SubjectPanel>& panels) {
    Standardizer s;
    for (const auto& p : panels) {
      const Vector mu = p.data.rowwise().mean();
      const Matrix c = p.data.colwise() - mu;
      Vector sd = (c.rowwise().squaredNorm() / static_cast<double>(std::max<Eigen::Index>(p.scans() - 1, 1))).cwiseSqrt();
      for (Eigen::Index d = 0; d < sd.size(); ++d)
        if (!(sd[d] > 0.0)) throw ShapeError("subject '" + p.id + "' has a constant node; cannot standardize");
      s.mean.push_back(mu);
      s.sd.push_back(sd);
    }
    return s;
  }

  Matrix apply(std::size_t i, const Matrix& X) const {
    return (X.colwise() - mean[i]).array().colwise() / sd[i].array();
  }
};

inline json chain_metadata(const RunConfig& rc, std::size_t chain, std::uint64_t chain_seed,
                           const DatasetManifest& m, const DrawsHeader& h, std::uint64_t records) {
  json ids = json::array();
  for (const auto& e : m.subjects) ids.push_back(e.id);
  const json cfg = run_config_to_json(rc);
  return json{{"software", "pdpm_var"},
              {"software_version", kSoftwareVersion},
              {"variant", to_string(rc.variant)},
              {"seed", rc.seed},
              {"chain", chain},
              {"chain_seed", chain_seed},
              {"config", cfg},
              {"config_hash", hex64(fnv1a64(cfg.dump()))},
              {"standardized", rc.standardize},
              {"subject_ids", ids},
              {"subjects", h.subjects},
              {"D", h.D},
              {"K", h.K},
              {"B", h.B},
              {"axes", h.axes},
              {"records", records}};
}

/// One run of chain c (1-based) into out/chain_c: draws.bin, trace.csv,
/// metadata.json and timing.json (wall time is kept out of metadata so
/// the rest stays byte-reproducible).
inline void fit_one_chain(const RunConfig& rc, const DatasetManifest& m, const std::vector<SubjectPanel>& panels,
                          std::size_t c, const fs::path& out) {
  const fs::path dir = out / numbered("chain_", c);
  fs::create_directories(dir);
  const std::uint64_t chain_seed = derive_seed(rc.seed, {c});
  const auto t0 = std::chrono::steady_clock::now();
  DrawsHeader header;
  header.variant = rc.variant;
  header.subjects = panels.size();
  header.D = panels.front().dim();
  header.K = rc.hp.K;
  header.B = rc.hp.factors_for(header.D);
  header.axes = axis_layout(rc.variant, header.D, rc.hp.K).size();

  DrawsWriter writer(dir / "draws.bin", header);
  Table trace;
  trace.header = {"record", "loglik", "cov_clusters"};
  for (std::size_t j = 0; j < header.axes; ++j) {
    trace.header.push_back(numbered("lambda2_", j + 1));
    trace.header.push_back(numbered("clusters_", j + 1));
  }
  run_chain(panels, rc.hp, rc.variant, chain_seed, [&](const DrawRecord& r) {
    writer.write(r);
    std::vector<std::string> row{std::to_string(writer.count()), format_double(r.loglik),
                                 std::to_string(occupied_count(r.cov_labels))};
    for (std::size_t j = 0; j < header.axes; ++j) {
      row.push_back(format_double(r.lambda2[j]));
      row.push_back(std::to_string(occupied_count(r.axis_labels[j])));
    }
    trace.add(std::move(row));
  });
  const std::uint64_t records = writer.count();
  writer.close();
  write_text(dir / "trace.csv", trace.to_csv());
  write_json(dir / "metadata.json", chain_metadata(rc, c, chain_seed, m, header, records));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(dir / "timing.json", json{{"wall_seconds", wall}});
}

inline void cmd_fit(const FitOptions& o) {
  RunConfig rc;
  if (o.config) rc = run_config_from_json(read_json(*o.config));
  if (o.seed) rc.seed = *o.seed;
  if (o.chains) {
    if (*o.chains < 1) throw ConfigError("chains", "must be >= 1");
    rc.chains = *o.chains;
  }
  if (o.standardize) rc.standardize = true;
  const DatasetManifest m = read_manifest(o.manifest);
  rc.hp.validate(m.D);
  std::vector<SubjectPanel> panels = load_panels(m);
  if (rc.standardize) {
    const auto s = Standardizer::fit(panels);
    for (std::size_t i = 0; i < panels.size(); ++i) panels[i].data = s.apply(i, panels[i].data);
  }
  const int threads = std::min(resolve_threads(o.threads), rc.chains);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(rc.chains));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c; (c = next.fetch_add(1)) < rc.chains;) {
      try {
        fit_one_chain(rc, m, panels, static_cast<std::size_t>(c + 1), o.out);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Loading fits

struct FitResult {
  std::vector<PosteriorDraws> chains;
  json metadata;  // of the first chain
  std::vector<std::string> subject_ids;

  const DrawsHeader& header() const { return chains.front().header; }

  /// All records of all chains, chain by chain.
  std::vector<const DrawRecord*> pooled() const {
    std::vector<const DrawRecord*> out;
    for (const auto& c : chains)
      for (const auto& r : c.records) out.push_back(&r);
    return out;
  }
};

/// `dir` holds either a single chain (draws.bin) or chain_1, chain_2, ...
inline FitResult load_fit(const fs::path& dir) {
  std::vector<fs::path> chain_dirs;
  if (fs::exists(dir / "draws.bin")) {
    chain_dirs.push_back(dir);
  } else {
    for (std::size_t c = 1; fs::exists(dir / numbered("chain_", c) / "draws.bin"); ++c)
      chain_dirs.push_back(dir / numbered("chain_", c));
  }
  if (chain_dirs.empty()) throw IoError("no draws found under '" + dir.string() + "'");
  FitResult f;
  for (const auto& cd : chain_dirs) f.chains.push_back(read_draws(cd / "draws.bin"));
  const auto& h0 = f.chains.front().header;
  for (const auto& c : f.chains)
    if (c.header.subjects != h0.subjects || c.header.D != h0.D || c.header.K != h0.K || c.header.axes != h0.axes ||
        c.header.variant != h0.variant)
      throw ShapeError("chains under '" + dir.string() + "' have different shapes");
  if (fs::exists(chain_dirs.front() / "metadata.json")) {
    f.metadata = read_json(chain_dirs.front() / "metadata.json");
    if (f.metadata.contains("subject_ids")) f.subject_ids = f.metadata["subject_ids"].get<std::vector<std::string>>();
  }
  if (f.subject_ids.empty())
    for (std::size_t i = 0; i < h0.subjects; ++i) f.subject_ids.push_back("s" + std::to_string(i + 1));
  if (f.subject_ids.size() != h0.subjects) throw ShapeError("metadata subject ids do not match the draws");
  return f;
}

inline std::vector<Matrix> posterior_mean_coefficients(const FitResult& f) {
  const auto recs = f.pooled();
  if (recs.empty()) throw ShapeError("fit has no stored draws");
  const auto& h = f.header();
  std::vector<Matrix> mean(h.subjects, Matrix::Zero(h.D, h.D * h.K));
  for (const auto* r : recs)
    for (std::size_t i = 0; i < h.subjects; ++i) mean[i] += r->coefficients[i];
  for (auto& m : mean) m /= static_cast<double>(recs.size());
  return mean;
}

inline std::vector<Matrix> posterior_mean_sigma(const FitResult& f) {
  const auto recs = f.pooled();
  if (recs.empty()) throw ShapeError("fit has no stored draws");
  const auto& h = f.header();
  std::vector<Matrix> mean(h.subjects, Matrix::Zero(h.D, h.D));
  for (const auto* r : recs)
    for (std::size_t i = 0; i < h.subjects; ++i) mean[i] += r->subject_sigma(i);
  for (auto& m : mean) m /= static_cast<double>(recs.size());
  return mean;
}

/// draws x (subjects * D * DK) matrix of coefficient samples; column order
/// is subject-major, then column-major within each D x DK matrix.
inline Matrix coefficient_samples(const FitResult& f) {
  const auto recs = f.pooled();
  const auto& h = f.header();
  const Eigen::Index per = h.D * h.D * h.K;
  Matrix S(static_cast<Eigen::Index>(recs.size()), per * static_cast<Eigen::Index>(h.subjects));
  for (std::size_t s = 0; s < recs.size(); ++s)
    for (std::size_t i = 0; i < h.subjects; ++i)
      S.row(static_cast<Eigen::Index>(s)).segment(per * static_cast<Eigen::Index>(i), per) =
          Eigen::Map<const Vector>(recs[s]->coefficients[i].data(), per).transpose();
  return S;
}

/// Panels and holdouts of a manifest, aligned to the fit's subject ids and
/// put on the fit's scale.
inline std::pair<std::vector<SubjectPanel>, std::vector<Matrix>> aligned_panels(const FitResult& f,
                                                                               const DatasetManifest& m) {
  auto panels = load_panels(m);
  auto holdouts = load_holdouts(m);
  if (panels.size() != f.subject_ids.size()) throw ShapeError("manifest and fit cover different subjects");
  for (std::size_t i = 0; i < panels.size(); ++i)
    if (panels[i].id != f.subject_ids[i])
      throw ShapeError("manifest subject '" + panels[i].id + "' does not match fit subject '" + f.subject_ids[i] + "'");
  if (f.metadata.is_object() && f.metadata.value("standardized", false)) {
    const auto s = Standardizer::fit(panels);
    for (std::size_t i = 0; i < panels.size(); ++i) {
      panels[i].data = s.apply(i, panels[i].data);
      if (holdouts[i].size()) holdouts[i] = s.apply(i, holdouts[i]);
    }
  }
  return {std::move(panels), std::move(holdouts)};
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  fs::path draws;
  std::optional<fs::path> manifest;
  std::optional<fs::path> truth;
  std::optional<fs::path> out;  // default: draws/metrics.csv
  std::optional<std::string> replicate;
  int horizon = 5;
};

/// Fixed metric-table header.
inline const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> h{"replicate", "metric", "value"};
  return h;
}

inline std::vector<AssignmentVector> label_draws(const std::vector<const DrawRecord*>& recs,
                                                 const std::function<AssignmentVector(const DrawRecord&)>& f) {
  std::vector<AssignmentVector> out;
  out.reserve(recs.size());
  for (const auto* r : recs) out.push_back(f(*r));
  return out;
}

/// Subject-level partition of a truth: subjects equal on every axis.
inline AssignmentVector truth_subject_partition(const GroundTruth& g) {
  const std::size_t n = g.subjects();
  std::map<std::vector<int>, int> key;
  AssignmentVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> k;
    for (const auto& ax : g.A_labels) k.push_back(ax[i]);
    auto it = key.emplace(k, static_cast<int>(key.size())).first;
    out[i] = it->second;
  }
  return canonical_labels(out);
}

inline AssignmentVector draw_subject_partition(const DrawRecord& r) {
  std::map<std::vector<int>, int> key;
  const std::size_t n = r.cov_labels.size();
  AssignmentVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> k;
    for (const auto& ax : r.axis_labels) k.push_back(ax[i]);
    out[i] = key.emplace(k, static_cast<int>(key.size())).first->second;
  }
  return canonical_labels(out);
}

inline bool layout_matches(Variant v, TruthLayout l) {
  return (v == Variant::pdpm && l == TruthLayout::subject) || (v == Variant::lg && l == TruthLayout::lag) ||
         (v == Variant::rg && l == TruthLayout::row);
}

/// Metric rows for one fit against its truth; `panels`/`holdouts` may be
/// empty, in which case forecast metrics are skipped.
inline Table evaluate_fit(const FitResult& f, const GroundTruth& g, const std::string& replicate,
                          const std::vector<SubjectPanel>& panels, const std::vector<Matrix>& holdouts,
                          int horizon) {
  const auto& h = f.header();
  if (g.subjects() != h.subjects) throw ShapeError("truth and fit cover different subject counts");
  if (g.subject_A.front().dim() != h.D || g.subject_A.front().order() != h.K)
    throw ShapeError("truth and fit have different D or K");
  const auto recs = f.pooled();
  if (recs.empty()) throw ShapeError("fit has no stored draws");
  Table t;
  t.header = metrics_header();
  auto add = [&](const std::string& metric, double v) { t.add({replicate, metric, format_double(v)}); };

  // Clustering.
  const auto cov_pc = point_clustering(label_draws(recs, [](const DrawRecord& r) { return r.cov_labels; }));
  add("ari_cov", h.subjects >= 2 ? adjusted_rand_index(cov_pc, g.cov_labels) : 1.0);
  const auto subj_pc = point_clustering(label_draws(recs, draw_subject_partition));
  add("ari_subject", adjusted_rand_index(subj_pc, truth_subject_partition(g)));
  if (layout_matches(h.variant, g.layout) && g.A_labels.size() == h.axes)
    for (std::size_t j = 0; j < h.axes; ++j) {
      const auto pc = point_clustering(label_draws(recs, [j](const DrawRecord& r) { return r.axis_labels[j]; }));
      add(numbered("ari_axis_", j + 1), adjusted_rand_index(pc, g.A_labels[j]));
    }
  const auto truth_rows = truth_row_partitions(g, h.D, h.K);
  double row_sum = 0.0;
  for (Eigen::Index d = 0; d < h.D; ++d) {
    const auto pc = point_clustering(label_draws(recs, [&](const DrawRecord& r) { return row_partition(h, r, d); }));
    const double a = adjusted_rand_index(pc, truth_rows[static_cast<std::size_t>(d)]);
    row_sum += a;
    add(numbered("ari_row_", static_cast<std::size_t>(d) + 1), a);
  }
  add("ari_row_mean", row_sum / static_cast<double>(h.D));
  if (f.chains.size() >= 2) {
    // Clustering reliability: least-squares clusterings of chains 1 and 2.
    std::vector<const DrawRecord*> c1, c2;
    for (const auto& r : f.chains[0].records) c1.push_back(&r);
    for (const auto& r : f.chains[1].records) c2.push_back(&r);
    if (!c1.empty() && !c2.empty())
      add("reliability_ari_subject", adjusted_rand_index(point_clustering(label_draws(c1, draw_subject_partition)),
                                                         point_clustering(label_draws(c2, draw_subject_partition))));
  }

  // Estimation error.
  const auto A_hat = posterior_mean_coefficients(f);
  const auto S_hat = posterior_mean_sigma(f);
  std::vector<Matrix> A_true, S_true;
  for (std::size_t i = 0; i < h.subjects; ++i) {
    A_true.push_back(g.subject_A[i].stacked());
    S_true.push_back(g.subject_sigma(i));
  }
  add("rel_l1_A", relative_error(A_hat, A_true, 1));
  add("rel_l2_A", relative_error(A_hat, A_true, 2));
  add("rel_l1_Sigma", relative_error(S_hat, S_true, 1));
  add("rel_l2_Sigma", relative_error(S_hat, S_true, 2));

  // Feature selection.
  const Matrix samples = coefficient_samples(f);
  std::vector<bool> nonzero;
  for (std::size_t i = 0; i < h.subjects; ++i) {
    const Matrix W = g.subject_A[i].stacked();
    for (Eigen::Index k = 0; k < W.size(); ++k) nonzero.push_back(W.data()[k] != 0.0);
  }
  if (samples.rows() >= 2) {
    const auto curves = credible_curves(samples, nonzero, default_credible_grid());
    add("roc_auc", curves.roc.defined ? curves.roc.auc : std::numeric_limits<double>::quiet_NaN());
    add("pr_auc", curves.pr.defined ? curves.pr.auc : std::numeric_limits<double>::quiet_NaN());
    add("pr_dropped_levels", static_cast<double>(curves.dropped_pr_points));
  }

  // Forecasting: mean over subjects of per-step relative errors.
  if (!panels.empty()) {
    std::vector<double> step(static_cast<std::size_t>(horizon), 0.0);
    double pooled = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      if (holdouts[i].cols() < horizon) continue;
      const Matrix pred = forecast(panels[i], AutocovSet::from_stacked(A_hat[i], h.K), horizon);
      const auto e = forecast_error(pred, holdouts[i].leftCols(horizon));
      for (int s = 0; s < horizon; ++s) step[static_cast<std::size_t>(s)] += e.per_step[static_cast<std::size_t>(s)];
      pooled += e.pooled;
      ++used;
    }
    if (used > 0) {
      for (int s = 0; s < horizon; ++s)
        add(numbered("forecast_h", static_cast<std::size_t>(s) + 1), step[static_cast<std::size_t>(s)] / static_cast<double>(used));
      add("forecast_pooled", pooled / static_cast<double>(used));
    }
  }
  return t;
}

inline void cmd_evaluate(const EvaluateOptions& o) {
  const FitResult f = load_fit(o.draws);
  std::optional<DatasetManifest> m;
  if (o.manifest) m = read_manifest(*o.manifest);
  fs::path truth_path;
  if (o.truth) truth_path = *o.truth;
  else if (m && !m->truth.empty()) truth_path = m->resolve(m->truth);
  else throw ConfigError("truth", "no truth archive given (use --truth or a manifest with a truth entry)");
  if (!fs::exists(truth_path)) throw ConfigError("truth", "truth archive '" + truth_path.string() + "' does not exist");
  const GroundTruth g = read_truth(truth_path);
  std::vector<SubjectPanel> panels;
  std::vector<Matrix> holdouts;
  if (m) std::tie(panels, holdouts) = aligned_panels(f, *m);
  const std::string rep = o.replicate ? *o.replicate : truth_path.parent_path().filename().string();
  const Table t = evaluate_fit(f, g, rep, panels, holdouts, o.horizon);
  write_text(o.out ? *o.out : o.draws / "metrics.csv", t.to_csv());
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeOptions {
  fs::path draws;
  double fdr = 0.05;
  std::optional<fs::path> groups;
  std::optional<fs::path> out;  // default: draws/summary
};

inline void cmd_summarize(const SummarizeOptions& o) {
  if (!(o.fdr > 0.0 && o.fdr <= 1.0)) throw ConfigError("fdr", "must lie in (0, 1]");
  const FitResult f = load_fit(o.draws);
  const auto& h = f.header();
  const auto recs = f.pooled();
  if (recs.empty()) throw ShapeError("fit has no stored draws");
  const fs::path out = o.out ? *o.out : o.draws / "summary";
  const Eigen::Index per = h.D * h.D * h.K;

  // Optional two-group contrast; validate before writing anything.
  std::vector<int> group_of(h.subjects, -1);
  std::vector<std::string> group_names;
  if (o.groups) {
    const Table gt = Table::from_csv(read_text(*o.groups));
    if (gt.header.size() != 2) throw ConfigError("groups", "expected a two-column file with header id,group");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < f.subject_ids.size(); ++i) index[f.subject_ids[i]] = i;
    for (const auto& row : gt.rows) {
      const auto it = index.find(row[0]);
      if (it == index.end()) throw ConfigError("groups", "unknown subject id '" + row[0] + "'");
      auto g = std::find(group_names.begin(), group_names.end(), row[1]);
      if (g == group_names.end()) {
        group_names.push_back(row[1]);
        g = group_names.end() - 1;
      }
      group_of[it->second] = static_cast<int>(g - group_names.begin());
    }
    if (group_names.size() != 2) throw ConfigError("groups", "expected exactly two groups");
  }

  const Matrix samples = coefficient_samples(f);
  const auto sel = fdr_select(samples, o.fdr);
  Table coef;
  coef.header = {"subject", "row", "lag", "col", "mean", "lower", "upper", "tail_probability", "selected"};
  const Vector mean = samples.colwise().mean().transpose();
  auto describe = [&](Eigen::Index j, Eigen::Index& row, Eigen::Index& lag, Eigen::Index& col) {
    const Eigen::Index local = j % per;  // column-major in D x DK
    row = local % h.D;
    const Eigen::Index c = local / h.D;
    lag = c / h.D;
    col = c % h.D;
  };
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    Eigen::Index row, lag, col;
    describe(j, row, lag, col);
    coef.add({f.subject_ids[static_cast<std::size_t>(j / per)], std::to_string(row + 1), std::to_string(lag + 1),
              std::to_string(col + 1), format_double(mean[j]), format_double(sel.lower[j]), format_double(sel.upper[j]),
              format_double(sel.tail_probability[j]), sel.selected[static_cast<std::size_t>(j)] ? "1" : "0"});
  }
  write_text(out / "coefficients.csv", coef.to_csv());

  if (o.groups) {
    Matrix contrast = Matrix::Zero(samples.rows(), per);
    std::vector<double> size(2, 0.0);
    for (std::size_t i = 0; i < h.subjects; ++i)
      if (group_of[i] >= 0) size[static_cast<std::size_t>(group_of[i])] += 1.0;
    for (std::size_t i = 0; i < h.subjects; ++i) {
      if (group_of[i] < 0) continue;
      const double w = group_of[i] == 0 ? 1.0 / size[0] : -1.0 / size[1];
      contrast += w * samples.middleCols(per * static_cast<Eigen::Index>(i), per);
    }
    const auto cs = fdr_select(contrast, o.fdr);
    Table ct;
    ct.header = {"row", "lag", "col", "mean", "lower", "upper", "tail_probability", "selected"};
    const Vector cm = contrast.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < per; ++j) {
      Eigen::Index row, lag, col;
      describe(j, row, lag, col);
      ct.add({std::to_string(row + 1), std::to_string(lag + 1), std::to_string(col + 1), format_double(cm[j]),
              format_double(cs.lower[j]), format_double(cs.upper[j]), format_double(cs.tail_probability[j]),
              cs.selected[static_cast<std::size_t>(j)] ? "1" : "0"});
    }
    write_text(out / ("contrast_" + group_names[0] + "_minus_" + group_names[1] + ".csv"), ct.to_csv());
  }

  Table pc;
  pc.header = {"subject", "cov"};
  for (std::size_t j = 0; j < h.axes; ++j) pc.header.push_back(numbered("axis_", j + 1));
  const auto cov_draws = label_draws(recs, [](const DrawRecord& r) { return r.cov_labels; });
  write_matrix_csv(out / "similarity_cov.csv", similarity_matrix(cov_draws));
  std::vector<AssignmentVector> points{point_clustering(cov_draws)};
  for (std::size_t j = 0; j < h.axes; ++j) {
    const auto d = label_draws(recs, [j](const DrawRecord& r) { return r.axis_labels[j]; });
    write_matrix_csv(out / (numbered("similarity_axis_", j + 1) + ".csv"), similarity_matrix(d));
    points.push_back(point_clustering(d));
  }
  for (std::size_t i = 0; i < h.subjects; ++i) {
    std::vector<std::string> row{f.subject_ids[i]};
    for (const auto& p : points) row.push_back(std::to_string(p[i]));
    pc.add(std::move(row));
  }
  write_text(out / "point_clustering.csv", pc.to_csv());
}

// ---------------------------------------------------------------------------
// forecast

struct ForecastOptions {
  fs::path draws;
  fs::path manifest;
  int horizon = 5;
  std::optional<fs::path> out;  // default: draws/forecast
  bool errors = false;          // require holdouts and fail without them
};

/// Per-subject forecasts from posterior-mean coefficients, plus per-step
/// errors against holdouts where they exist.
inline void cmd_forecast(const ForecastOptions& o) {
  if (o.horizon < 1) throw ConfigError("horizon", "must be >= 1");
  const FitResult f = load_fit(o.draws);
  const DatasetManifest m = read_manifest(o.manifest);
  const auto [panels, holdouts] = aligned_panels(f, m);
  const auto A_hat = posterior_mean_coefficients(f);
  const fs::path out = o.out ? *o.out : o.draws / "forecast";
  if (o.errors)
    for (std::size_t i = 0; i < panels.size(); ++i)
      if (holdouts[i].cols() < o.horizon)
        throw ConfigError("errors", "subject '" + panels[i].id + "' has no holdout covering horizon " + std::to_string(o.horizon));
  Table et;
  et.header = {"subject", "step", "error"};
  bool any = false;
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const Matrix pred = forecast(panels[i], AutocovSet::from_stacked(A_hat[i], f.header().K), o.horizon);
    write_matrix_csv(out / (panels[i].id + ".csv"), pred);
    if (holdouts[i].cols() >= o.horizon) {
      const auto e = forecast_error(pred, holdouts[i].leftCols(o.horizon));
      for (int s = 0; s < o.horizon; ++s)
        et.add({panels[i].id, std::to_string(s + 1), format_double(e.per_step[static_cast<std::size_t>(s)])});
      et.add({panels[i].id, "pooled", format_double(e.pooled)});
      any = true;
    }
  }
  if (any) write_text(out / "errors.csv", et.to_csv());
}

}  // namespace pdpm
