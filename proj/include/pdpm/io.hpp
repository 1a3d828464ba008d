#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pdpm/chain.hpp"
#include "pdpm/errors.hpp"
#include "pdpm/model.hpp"
#include "pdpm/simgen.hpp"
#include "pdpm/var_core.hpp"

// File formats. Panels and tables are comma-separated text written with
// %.17g so every double round-trips exactly; configs, manifests, truth and
// metadata are JSON; posterior draws are fixed-length little-endian binary
// records behind a self-describing header.

namespace pdpm {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kSoftwareVersion = "0.1.0";
inline constexpr const char* kManifestVersion = "pdpm-dataset/1";
inline constexpr const char* kTruthVersion = "pdpm-truth/1";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Delimited matrices

inline std::string matrix_to_csv(const Matrix& M) {
  std::string s;
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (c) s += ',';
      s += format_double(M(r, c));
    }
    s += '\n';
  }
  return s;
}

inline Matrix matrix_from_csv(const std::string& text, const std::string& origin = "matrix") {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = std::min(line.find(',', pos), line.size());
      const std::string cell = line.substr(pos, next - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw ShapeError(origin + ": cannot parse '" + cell + "' on row " + std::to_string(rows.size() + 1));
      row.push_back(v);
      pos = next + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeError(origin + ": row " + std::to_string(rows.size() + 1) + " has " + std::to_string(row.size()) +
                       " columns, expected " + std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  Matrix M(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return M;
}

inline void write_matrix_csv(const fs::path& path, const Matrix& M) { write_text(path, matrix_to_csv(M)); }
inline Matrix read_matrix_csv(const fs::path& path) { return matrix_from_csv(read_text(path), path.string()); }

inline json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of rows");
  const auto R = j.size();
  const auto C = R ? j[0].size() : 0;
  Matrix M(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(C));
  for (std::size_t r = 0; r < R; ++r) {
    if (!j[r].is_array() || j[r].size() != C) throw ConfigError(field, "rows must be arrays of equal length");
    for (std::size_t c = 0; c < C; ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return M;
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct ManifestEntry {
  std::string id;
  std::string path;     // relative to the manifest directory
  Eigen::Index T = 0;
  std::string holdout;  // optional, relative
};

struct DatasetManifest {
  std::string version = kManifestVersion;
  Eigen::Index D = 0;
  int K = 0;  // 0 = no hint
  std::vector<ManifestEntry> subjects;
  std::string truth;  // optional, relative
  fs::path base;      // directory the relative paths resolve against

  fs::path resolve(const std::string& rel) const { return base / rel; }
};

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["version"] = m.version;
  j["D"] = m.D;
  if (m.K > 0) j["K"] = m.K;
  j["subjects"] = json::array();
  for (const auto& e : m.subjects) {
    json s{{"id", e.id}, {"path", e.path}, {"T", e.T}};
    if (!e.holdout.empty()) s["holdout"] = e.holdout;
    j["subjects"].push_back(std::move(s));
  }
  if (!m.truth.empty()) j["truth"] = m.truth;
  return j;
}

inline DatasetManifest manifest_from_json(const json& j, const fs::path& base) {
  DatasetManifest m;
  m.base = base;
  try {
    m.version = j.at("version").get<std::string>();
    if (m.version != kManifestVersion) throw ConfigError("version", "unsupported manifest version '" + m.version + "'");
    m.D = j.at("D").get<Eigen::Index>();
    if (j.contains("K")) m.K = j.at("K").get<int>();
    if (j.contains("truth")) m.truth = j.at("truth").get<std::string>();
    for (const auto& s : j.at("subjects")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.path = s.at("path").get<std::string>();
      e.T = s.at("T").get<Eigen::Index>();
      if (s.contains("holdout")) e.holdout = s.at("holdout").get<std::string>();
      m.subjects.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ConfigError("manifest", e.what());
  }
  if (m.D < 1) throw ConfigError("D", "must be >= 1");
  if (m.subjects.empty()) throw ConfigError("subjects", "manifest lists no subjects");
  std::set<std::string> ids;
  for (const auto& e : m.subjects)
    if (!ids.insert(e.id).second) throw ConfigError("subjects", "duplicate subject id '" + e.id + "'");
  return m;
}

inline DatasetManifest read_manifest(const fs::path& path) {
  return manifest_from_json(read_json(path), path.parent_path());
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) { write_json(path, manifest_to_json(m)); }

/// Load every panel, checking D and T against the manifest.
inline std::vector<SubjectPanel> load_panels(const DatasetManifest& m) {
  std::vector<SubjectPanel> out;
  for (const auto& e : m.subjects) {
    Matrix X = read_matrix_csv(m.resolve(e.path));
    if (X.rows() != m.D)
      throw ShapeError("subject '" + e.id + "' has " + std::to_string(X.rows()) + " rows, manifest says D = " + std::to_string(m.D));
    if (X.cols() != e.T)
      throw ShapeError("subject '" + e.id + "' has " + std::to_string(X.cols()) + " scans, manifest says T = " + std::to_string(e.T));
    out.push_back(SubjectPanel{e.id, std::move(X)});
  }
  return out;
}

/// Holdout panels in manifest order; empty matrices where none is listed.
inline std::vector<Matrix> load_holdouts(const DatasetManifest& m) {
  std::vector<Matrix> out;
  for (const auto& e : m.subjects) {
    if (e.holdout.empty()) { out.emplace_back(); continue; }
    Matrix H = read_matrix_csv(m.resolve(e.holdout));
    if (H.rows() != m.D) throw ShapeError("holdout of '" + e.id + "' has the wrong row count");
    out.push_back(std::move(H));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth

inline json truth_to_json(const GroundTruth& g) {
  json j;
  j["version"] = kTruthVersion;
  j["layout"] = to_string(g.layout);
  j["cov_labels"] = g.cov_labels;
  j["A_labels"] = g.A_labels;
  j["cluster_Sigma"] = json::array();
  for (const auto& S : g.cluster_Sigma) j["cluster_Sigma"].push_back(matrix_to_json(S));
  j["subject_A"] = json::array();
  j["zero_mask"] = json::array();
  for (std::size_t i = 0; i < g.subjects(); ++i) {
    json lags = json::array(), masks = json::array();
    for (std::size_t k = 0; k < g.subject_A[i].lags.size(); ++k) {
      lags.push_back(matrix_to_json(g.subject_A[i].lags[k]));
      masks.push_back(matrix_to_json(g.zero_mask[i][k].cast<double>()));
    }
    j["subject_A"].push_back(std::move(lags));
    j["zero_mask"].push_back(std::move(masks));
  }
  return j;
}

inline GroundTruth truth_from_json(const json& j) {
  GroundTruth g;
  try {
    if (j.at("version").get<std::string>() != kTruthVersion) throw ConfigError("version", "unsupported truth version");
    const auto layout = j.at("layout").get<std::string>();
    if (layout == "subject") g.layout = TruthLayout::subject;
    else if (layout == "lag") g.layout = TruthLayout::lag;
    else if (layout == "row") g.layout = TruthLayout::row;
    else throw ConfigError("layout", "unknown truth layout '" + layout + "'");
    g.cov_labels = j.at("cov_labels").get<AssignmentVector>();
    g.A_labels = j.at("A_labels").get<std::vector<AssignmentVector>>();
    for (const auto& S : j.at("cluster_Sigma")) g.cluster_Sigma.push_back(matrix_from_json(S, "cluster_Sigma"));
    for (const auto& lags : j.at("subject_A")) {
      AutocovSet A;
      for (const auto& L : lags) A.lags.push_back(matrix_from_json(L, "subject_A"));
      g.subject_A.push_back(std::move(A));
    }
    for (const auto& masks : j.at("zero_mask")) {
      std::vector<Eigen::MatrixXi> ms;
      for (const auto& M : masks) ms.push_back(matrix_from_json(M, "zero_mask").cast<int>());
      g.zero_mask.push_back(std::move(ms));
    }
  } catch (const json::exception& e) {
    throw ConfigError("truth", e.what());
  }
  if (g.cov_labels.size() != g.subject_A.size() || g.zero_mask.size() != g.subject_A.size())
    throw ConfigError("truth", "per-subject arrays have different lengths");
  return g;
}

inline void write_truth(const fs::path& path, const GroundTruth& g) { write_json(path, truth_to_json(g)); }
inline GroundTruth read_truth(const fs::path& path) { return truth_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Configs. Unknown keys are rejected so typos surface as errors.

namespace detail {

template <class T>
void take(const json& j, const char* key, T& dst, std::set<std::string>& seen) {
  if (!j.contains(key)) return;
  seen.insert(key);
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

inline void reject_unknown(const json& j, const std::set<std::string>& seen) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!seen.count(it.key())) throw ConfigError(it.key(), "unknown configuration key");
}

}  // namespace detail

inline void read_hyperparams(const json& j, HyperParams& hp, std::set<std::string>& seen) {
  using detail::take;
  take(j, "alpha_cov", hp.alpha_cov, seen);
  take(j, "alpha_A", hp.alpha_A, seen);
  take(j, "a_sigma", hp.a_sigma, seen);
  take(j, "b_sigma", hp.b_sigma, seen);
  take(j, "lasso_r", hp.lasso_r, seen);
  take(j, "lasso_delta", hp.lasso_delta, seen);
  take(j, "B", hp.B, seen);
  take(j, "K", hp.K, seen);
  take(j, "burn_in", hp.burn_in, seen);
  take(j, "n_iter", hp.n_iter, seen);
  take(j, "thin", hp.thin, seen);
  take(j, "max_cov_components", hp.max_cov_components, seen);
  take(j, "max_A_components", hp.max_A_components, seen);
  take(j, "init_clusters", hp.init_clusters, seen);
  take(j, "ridge", hp.ridge, seen);
  take(j, "collapse_limit", hp.collapse_limit, seen);
  take(j, "split_merge", hp.split_merge, seen);
}

inline json hyperparams_to_json(const HyperParams& hp) {
  return json{{"alpha_cov", hp.alpha_cov},
              {"alpha_A", hp.alpha_A},
              {"a_sigma", hp.a_sigma},
              {"b_sigma", hp.b_sigma},
              {"lasso_r", hp.lasso_r},
              {"lasso_delta", hp.lasso_delta},
              {"B", hp.B},
              {"K", hp.K},
              {"burn_in", hp.burn_in},
              {"n_iter", hp.n_iter},
              {"thin", hp.thin},
              {"max_cov_components", hp.max_cov_components},
              {"max_A_components", hp.max_A_components},
              {"init_clusters", hp.init_clusters},
              {"ridge", hp.ridge},
              {"collapse_limit", hp.collapse_limit},
              {"split_merge", hp.split_merge}};
}

struct RunConfig {
  Variant variant = Variant::pdpm;
  HyperParams hp;
  std::uint64_t seed = 1;
  int chains = 1;
  bool standardize = false;
};

inline RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  RunConfig rc;
  std::set<std::string> seen;
  std::string variant = to_string(rc.variant);
  detail::take(j, "variant", variant, seen);
  rc.variant = parse_variant(variant);
  detail::take(j, "seed", rc.seed, seen);
  detail::take(j, "chains", rc.chains, seen);
  detail::take(j, "standardize", rc.standardize, seen);
  read_hyperparams(j, rc.hp, seen);
  detail::reject_unknown(j, seen);
  if (rc.chains < 1) throw ConfigError("chains", "must be >= 1");
  rc.hp.validate(0);
  return rc;
}

inline json run_config_to_json(const RunConfig& rc) {
  json j = hyperparams_to_json(rc.hp);
  j["variant"] = to_string(rc.variant);
  j["seed"] = rc.seed;
  j["chains"] = rc.chains;
  j["standardize"] = rc.standardize;
  return j;
}

inline SimConfig sim_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  using detail::take;
  SimConfig c;
  std::set<std::string> seen;
  take(j, "setting", c.setting, seen);
  take(j, "n", c.n, seen);
  take(j, "D", c.D, seen);
  take(j, "K", c.K, seen);
  if (j.contains("T")) {
    seen.insert("T");
    if (j["T"].is_number_integer()) c.T_choices = {j["T"].get<int>()};
    else take(j, "T", c.T_choices, seen);
  }
  take(j, "sparsity", c.sparsity, seen);
  take(j, "holdout", c.holdout, seen);
  take(j, "seed", c.seed, seen);
  take(j, "replicates", c.replicates, seen);
  take(j, "subject_clusters", c.subject_clusters, seen);
  take(j, "lag_clusters", c.lag_clusters, seen);
  take(j, "row_clusters_min", c.row_clusters_min, seen);
  take(j, "row_clusters_max", c.row_clusters_max, seen);
  take(j, "cov_clusters", c.cov_clusters, seen);
  take(j, "coef_min", c.coef_min, seen);
  take(j, "coef_max", c.coef_max, seen);
  take(j, "target_radius", c.target_radius, seen);
  take(j, "noise_sd", c.noise_sd, seen);
  take(j, "burn", c.burn, seen);
  detail::reject_unknown(j, seen);
  c.validate();
  return c;
}

/// 64-bit FNV-1a, used to fingerprint configs in run metadata.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Posterior draws (binary)
//
// Header: magic "PDPMDRW1", u32 version, u32 variant, u64 subjects, u64 D,
// u32 K, u32 B, u64 axes, u64 record count. Each record: f64 loglik,
// axes x f64 lambda^2, subjects x i32 covariance labels, axes x subjects x
// i32 axis labels, then per subject D x DK coefficients, D x B identified
// loadings and D idiosyncratic variances, all column-major f64.

inline constexpr char kDrawsMagic[8] = {'P', 'D', 'P', 'M', 'D', 'R', 'W', '1'};
inline constexpr std::uint32_t kDrawsVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& origin) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError(origin + ": truncated draws file");
  return v;
}

inline void put_matrix(std::ostream& out, const Matrix& M) {
  out.write(reinterpret_cast<const char*>(M.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(M.size())));
}

inline void get_matrix(std::istream& in, Matrix& M, const std::string& origin) {
  in.read(reinterpret_cast<char*>(M.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(M.size())));
  if (!in) throw IoError(origin + ": truncated draws file");
}

}  // namespace detail

/// Streams records to disk; the record count in the header is patched on
/// close().
class DrawsWriter {
 public:
  DrawsWriter(const fs::path& path, const DrawsHeader& h) : header_(h), path_(path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
    out_.write(kDrawsMagic, 8);
    detail::put<std::uint32_t>(out_, kDrawsVersion);
    detail::put<std::uint32_t>(out_, static_cast<std::uint32_t>(h.variant));
    detail::put<std::uint64_t>(out_, h.subjects);
    detail::put<std::uint64_t>(out_, static_cast<std::uint64_t>(h.D));
    detail::put<std::uint32_t>(out_, static_cast<std::uint32_t>(h.K));
    detail::put<std::uint32_t>(out_, static_cast<std::uint32_t>(h.B));
    detail::put<std::uint64_t>(out_, h.axes);
    count_pos_ = out_.tellp();
    detail::put<std::uint64_t>(out_, 0);
  }

  void write(const DrawRecord& r) {
    if (r.coefficients.size() != header_.subjects || r.axis_labels.size() != header_.axes)
      throw ShapeError("record does not match the draws header");
    detail::put<double>(out_, r.loglik);
    for (double l : r.lambda2) detail::put<double>(out_, l);
    for (int l : r.cov_labels) detail::put<std::int32_t>(out_, l);
    for (const auto& ax : r.axis_labels)
      for (int l : ax) detail::put<std::int32_t>(out_, l);
    for (std::size_t i = 0; i < header_.subjects; ++i) {
      detail::put_matrix(out_, r.coefficients[i]);
      detail::put_matrix(out_, r.loadings[i]);
      detail::put_matrix(out_, r.idio_var[i]);
    }
    if (!out_) throw IoError("write failed for '" + path_.string() + "'");
    ++count_;
  }

  void close() {
    if (!out_.is_open()) return;
    out_.seekp(count_pos_);
    detail::put<std::uint64_t>(out_, count_);
    out_.close();
    if (!out_) throw IoError("close failed for '" + path_.string() + "'");
  }

  ~DrawsWriter() {
    try { close(); } catch (...) {}
  }

  std::uint64_t count() const { return count_; }

 private:
  DrawsHeader header_;
  fs::path path_;
  std::ofstream out_;
  std::streampos count_pos_{};
  std::uint64_t count_ = 0;
};

inline PosteriorDraws read_draws(const fs::path& path) {
  const std::string origin = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + origin + "' for reading");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kDrawsMagic, 8) != 0) throw IoError(origin + ": not a draws file");
  if (detail::get<std::uint32_t>(in, origin) != kDrawsVersion) throw IoError(origin + ": unsupported draws version");
  PosteriorDraws d;
  auto& h = d.header;
  const auto variant = detail::get<std::uint32_t>(in, origin);
  if (variant > 2) throw IoError(origin + ": bad variant code");
  h.variant = static_cast<Variant>(variant);
  h.subjects = detail::get<std::uint64_t>(in, origin);
  h.D = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in, origin));
  h.K = static_cast<int>(detail::get<std::uint32_t>(in, origin));
  h.B = static_cast<int>(detail::get<std::uint32_t>(in, origin));
  h.axes = detail::get<std::uint64_t>(in, origin);
  const auto count = detail::get<std::uint64_t>(in, origin);
  // Bytes per record, to reject a count the file cannot hold before allocating.
  const std::uint64_t per_subject = 8 * static_cast<std::uint64_t>(h.D) * (h.D * h.K + h.B + 1);
  const std::uint64_t record_bytes = 8 + 8 * h.axes + 4 * h.subjects * (1 + h.axes) + per_subject * h.subjects;
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
  in.seekg(here);
  if (record_bytes == 0 || count > remaining / record_bytes) throw IoError(origin + ": truncated draws file");
  d.records.reserve(count);
  for (std::uint64_t c = 0; c < count; ++c) {
    DrawRecord r;
    r.loglik = detail::get<double>(in, origin);
    r.lambda2.resize(h.axes);
    for (auto& l : r.lambda2) l = detail::get<double>(in, origin);
    r.cov_labels.resize(h.subjects);
    for (auto& l : r.cov_labels) l = detail::get<std::int32_t>(in, origin);
    r.axis_labels.assign(h.axes, AssignmentVector(h.subjects));
    for (auto& ax : r.axis_labels)
      for (auto& l : ax) l = detail::get<std::int32_t>(in, origin);
    for (std::size_t i = 0; i < h.subjects; ++i) {
      Matrix W(h.D, h.D * h.K), G(h.D, h.B), w(h.D, 1);
      detail::get_matrix(in, W, origin);
      detail::get_matrix(in, G, origin);
      detail::get_matrix(in, w, origin);
      r.coefficients.push_back(std::move(W));
      r.loadings.push_back(std::move(G));
      r.idio_var.push_back(w.col(0));
    }
    d.records.push_back(std::move(r));
  }
  return d;
}

inline void write_draws(const fs::path& path, const PosteriorDraws& d) {
  DrawsWriter w(path, d.header);
  for (const auto& r : d.records) w.write(r);
  w.close();
}

// ---------------------------------------------------------------------------
// Delimited tables with a fixed header

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw ShapeError("table row has the wrong number of fields");
    rows.push_back(std::move(row));
  }

  std::string to_csv() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (k) s += ',';
        s += r[k];
      }
      s += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return s;
  }

  static Table from_csv(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::size_t pos = 0;
      while (true) {
        const std::size_t next = line.find(',', pos);
        cells.push_back(line.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
        if (next == std::string::npos) break;
        pos = next + 1;
      }
      if (first) { t.header = std::move(cells); first = false; }
      else t.add(std::move(cells));
    }
    return t;
  }
};

}  // namespace pdpm
