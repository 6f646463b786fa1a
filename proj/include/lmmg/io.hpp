// TSV dataset files and the JSON model file.
//
// Edges:    one "src<TAB>dst" per line; '#' starts a comment line.
// Features: header "node<TAB>f1...fL", then one row per node with cells
//           0, 1 or ? (missing).
// Model:    JSON; every real number is a shortest round-trip decimal string.
#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lmmg/log.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

struct LoadedDataset {
  Dataset data;
  std::size_t self_loops = 0;
  std::size_t duplicate_edges = 0;
};

namespace detail {

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != '\t' && line[j] != ' ') ++j;
    out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline void chomp(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

inline bool blank_or_comment(const std::string& s) {
  const auto p = s.find_first_not_of(" \t");
  return p == std::string::npos || s[p] == '#';
}

}  // namespace detail

/// Parses the two TSV streams. Nodes are indexed in features-file order,
/// followed by nodes that appear only in the edge list (all cells missing).
inline LoadedDataset parse_dataset(std::istream& edges, std::istream* features, bool undirected) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> names;
  std::vector<std::vector<Cell>> rows;

  if (features) {
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(*features, line)) {
      ++lineno;
      detail::chomp(line);
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      auto f = detail::split_tabs(line);
      if (!header) {
        if (f.empty() || f[0] != "node") throw DataError("features line " + std::to_string(lineno) + ": header must start with 'node'");
        names.assign(f.begin() + 1, f.end());
        header = true;
        continue;
      }
      if (f.size() != names.size() + 1)
        throw DataError("features line " + std::to_string(lineno) + ": expected " + std::to_string(names.size() + 1) + " fields");
      if (index.contains(f[0])) throw DataError("features line " + std::to_string(lineno) + ": duplicate node '" + f[0] + "'");
      std::vector<Cell> row;
      row.reserve(names.size());
      for (std::size_t c = 1; c < f.size(); ++c) {
        if (f[c] == "0") row.push_back(Cell::zero);
        else if (f[c] == "1") row.push_back(Cell::one);
        else if (f[c] == "?") row.push_back(Cell::missing);
        else throw DataError("features line " + std::to_string(lineno) + ": value '" + f[c] + "' is not 0, 1 or ?");
      }
      index.emplace(f[0], ids.size());
      ids.push_back(f[0]);
      rows.push_back(std::move(row));
    }
    if (!header) throw DataError("features file has no header");
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const auto intern = [&](const std::string& id) {
    auto [it, inserted] = index.emplace(id, ids.size());
    if (inserted) ids.push_back(id);
    return it->second;
  };
  std::string line;
  std::size_t lineno = 0;
  LoadedDataset out;
  while (std::getline(edges, line)) {
    ++lineno;
    detail::chomp(line);
    if (detail::blank_or_comment(line)) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 2) throw DataError("edges line " + std::to_string(lineno) + ": expected 'src<TAB>dst'");
    const auto a = intern(f[0]);
    const auto b = intern(f[1]);
    if (a == b) {
      ++out.self_loops;
      continue;
    }
    pairs.emplace_back(a, b);
    if (undirected) pairs.emplace_back(b, a);
  }

  out.data = Dataset(ids.size(), names.size());
  out.data.node_ids = ids;
  out.data.feature_names = names;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t l = 0; l < names.size(); ++l) out.data.set_feature(i, l, rows[i][l]);
  for (const auto& [a, b] : pairs)
    if (!out.data.add_edge(a, b)) ++out.duplicate_edges;
  if (out.self_loops > 0) warn("dropped " + std::to_string(out.self_loops) + " self-loop(s)");
  return out;
}

inline LoadedDataset load_dataset(const std::string& edges_path, const std::string& features_path, bool undirected) {
  std::ifstream edges(edges_path);
  if (!edges) throw DataError("cannot open edges file '" + edges_path + "'");
  if (features_path.empty()) return parse_dataset(edges, nullptr, undirected);
  std::ifstream features(features_path);
  if (!features) throw DataError("cannot open features file '" + features_path + "'");
  return parse_dataset(edges, &features, undirected);
}

/// Writes edges sorted by (source, destination) index and every node's feature row.
inline void write_dataset(const Dataset& d, std::ostream& edges, std::ostream& features) {
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    auto out = d.out_neighbors(i);
    std::sort(out.begin(), out.end());
    for (auto j : out) edges << d.node_ids[i] << '\t' << d.node_ids[j] << '\n';
  }
  features << "node";
  for (const auto& name : d.feature_names) features << '\t' << name;
  features << '\n';
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    features << d.node_ids[i];
    for (std::size_t l = 0; l < d.n_features(); ++l) {
      const auto c = d.feature(i, l);
      features << '\t' << (c == Cell::one ? '1' : c == Cell::zero ? '0' : '?');
    }
    features << '\n';
  }
}

inline void save_dataset(const Dataset& d, const std::string& edges_path, const std::string& features_path) {
  std::ofstream edges(edges_path);
  std::ofstream features(features_path);
  if (!edges || !features) throw DataError("cannot write dataset files");
  write_dataset(d, edges, features);
}

// ---------------------------------------------------------------------------
// Model file

constexpr int kModelFormatVersion = 1;

struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::string timestamp;
};

struct ModelFile {
  ModelState state;
  std::vector<std::string> node_ids;
  std::vector<std::string> feature_names;
  Provenance provenance;
};

inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_real(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw DataError("bad number '" + s + "' in model file");
  return v;
}

inline nlohmann::json model_to_json(const ModelFile& m) {
  using nlohmann::json;
  const auto& s = m.state;
  const auto& h = s.hyper;
  json j;
  j["format_version"] = kModelFormatVersion;
  j["n"] = s.n_nodes();
  j["l"] = s.n_features();
  j["k"] = s.groups();
  j["node_ids"] = m.node_ids;
  j["feature_names"] = m.feature_names;

  json phi = json::array();
  for (Eigen::Index i = 0; i < s.phi().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < s.phi().cols(); ++k) row.push_back(format_real(s.phi()(i, k)));
    phi.push_back(row);
  }
  j["phi"] = phi;

  json w = json::array();
  for (Eigen::Index l = 0; l < s.w().rows(); ++l) {
    json row = json::array();
    for (Eigen::Index k = 0; k < s.w().cols(); ++k) row.push_back(format_real(s.w()(l, k)));
    w.push_back(row);
  }
  j["w"] = w;

  json theta = json::array();
  for (const auto& t : s.theta())
    theta.push_back(json::array({json::array({format_real(t[0][0]), format_real(t[0][1])}),
                                 json::array({format_real(t[1][0]), format_real(t[1][1])})}));
  j["theta"] = theta;

  json alpha = json::array();
  for (std::size_t k = 0; k < s.groups(); ++k) {
    const auto a = h.prior(k);
    alpha.push_back(json::array({format_real(a.a), format_real(a.b)}));
  }
  j["alpha"] = alpha;

  j["hyper"] = {
      {"lambda", format_real(h.lambda)},
      {"gamma_phi", format_real(h.gamma_phi)},
      {"gamma_f", format_real(h.gamma_f)},
      {"gamma_a", format_real(h.gamma_a)},
      {"clamp_eps", format_real(h.clamp_eps)},
      {"rel_tol", format_real(h.rel_tol)},
      {"max_outer_iters", h.max_outer_iters},
      {"inner_passes", h.inner_passes},
      {"foldin_iters", h.foldin_iters},
      {"seed", h.seed},
      {"backtrack", h.backtrack},
      {"sweep", h.sweep == PhiSweep::gauss_seidel ? "gauss_seidel" : "frozen"},
      {"feature_gradient", h.feature_gradient == FeatureGradient::normalized ? "normalized" : "exact"},
  };
  j["provenance"] = {{"command", m.provenance.command}, {"seed", m.provenance.seed}, {"timestamp", m.provenance.timestamp}};
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format version");
    ModelFile m;
    const auto n = j.at("n").get<std::size_t>();
    const auto l = j.at("l").get<std::size_t>();
    const auto k = j.at("k").get<std::size_t>();
    m.node_ids = j.at("node_ids").get<std::vector<std::string>>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (m.node_ids.size() != n || m.feature_names.size() != l) throw DataError("model file id lists do not match counts");

    auto& s = m.state;
    const auto& phi = j.at("phi");
    if (phi.size() != n) throw DataError("phi has wrong row count");
    s.phi().resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
      if (phi[i].size() != k) throw DataError("phi row has wrong length");
      for (std::size_t g = 0; g < k; ++g)
        s.phi()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = parse_real(phi[i][g].get<std::string>());
    }
    const auto& w = j.at("w");
    if (w.size() != l) throw DataError("w has wrong row count");
    s.w().resize(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k + 1));
    for (std::size_t r = 0; r < l; ++r) {
      if (w[r].size() != k + 1) throw DataError("w row has wrong length");
      for (std::size_t g = 0; g <= k; ++g)
        s.w()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(g)) = parse_real(w[r][g].get<std::string>());
    }
    const auto& theta = j.at("theta");
    if (theta.size() != k) throw DataError("theta has wrong length");
    for (const auto& t : theta) {
      Table2 tab;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) tab[a][b] = parse_real(t.at(a).at(b).get<std::string>());
      s.theta().push_back(tab);
    }
    for (const auto& a : j.at("alpha"))
      s.hyper.alpha.push_back({parse_real(a.at(0).get<std::string>()), parse_real(a.at(1).get<std::string>())});

    const auto& h = j.at("hyper");
    s.hyper.lambda = parse_real(h.at("lambda").get<std::string>());
    s.hyper.gamma_phi = parse_real(h.at("gamma_phi").get<std::string>());
    s.hyper.gamma_f = parse_real(h.at("gamma_f").get<std::string>());
    s.hyper.gamma_a = parse_real(h.at("gamma_a").get<std::string>());
    s.hyper.clamp_eps = parse_real(h.at("clamp_eps").get<std::string>());
    s.hyper.rel_tol = parse_real(h.at("rel_tol").get<std::string>());
    s.hyper.max_outer_iters = h.at("max_outer_iters").get<std::size_t>();
    s.hyper.inner_passes = h.at("inner_passes").get<std::size_t>();
    s.hyper.foldin_iters = h.at("foldin_iters").get<std::size_t>();
    s.hyper.seed = h.at("seed").get<std::uint64_t>();
    s.hyper.backtrack = h.at("backtrack").get<bool>();
    s.hyper.sweep = h.at("sweep").get<std::string>() == "frozen" ? PhiSweep::frozen : PhiSweep::gauss_seidel;
    s.hyper.feature_gradient =
        h.at("feature_gradient").get<std::string>() == "exact" ? FeatureGradient::exact : FeatureGradient::normalized;

    const auto& p = j.at("provenance");
    m.provenance.command = p.at("command").get<std::string>();
    m.provenance.seed = p.at("seed").get<std::uint64_t>();
    m.provenance.timestamp = p.at("timestamp").get<std::string>();
    s.check_consistent();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const ModelFile& m, std::ostream& os) { os << model_to_json(m).dump(2) << '\n'; }

inline void save_model(const ModelFile& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write model file '" + path + "'");
  save_model(m, os);
}

inline ModelFile load_model(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open model file '" + path + "'");
  return load_model(is);
}

}  // namespace lmmg
