// Core domain types: the observed dataset and the fitted parameter blocks.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lmmg {

// Error taxonomy. The CLI maps each family onto an exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A binary feature cell. `missing` cells are excluded from every likelihood sum.
enum class Cell : std::int8_t { zero = 0, one = 1, missing = -1 };

/// Directed binary graph over `n` nodes plus an n x L ternary feature matrix.
///
/// Self-pairs are never stored. Nodes flagged with `hide_links` have all of
/// their incident pairs treated as unobserved by the network likelihood; this
/// is how a node is held out for link prediction.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t n_nodes, std::size_t n_features)
      : n_(n_nodes),
        l_(n_features),
        adj_(n_nodes * n_nodes, 0),
        feats_(n_nodes * n_features, Cell::missing),
        hidden_(n_nodes, 0),
        out_(n_nodes),
        in_(n_nodes) {
    node_ids.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) node_ids.push_back(std::to_string(i));
    feature_names.reserve(n_features);
    for (std::size_t l = 0; l < n_features; ++l) feature_names.push_back("f" + std::to_string(l + 1));
  }

  std::size_t n_nodes() const { return n_; }
  std::size_t n_features() const { return l_; }

  bool edge(std::size_t i, std::size_t j) const { return adj_[i * n_ + j] != 0; }

  /// Adds i -> j. Returns false for self-loops and duplicates.
  bool add_edge(std::size_t i, std::size_t j) {
    check_node(i);
    check_node(j);
    if (i == j || adj_[i * n_ + j]) return false;
    adj_[i * n_ + j] = 1;
    out_[i].push_back(j);
    in_[j].push_back(i);
    ++n_edges_;
    return true;
  }

  bool remove_edge(std::size_t i, std::size_t j) {
    if (i == j || !adj_[i * n_ + j]) return false;
    adj_[i * n_ + j] = 0;
    std::erase(out_[i], j);
    std::erase(in_[j], i);
    --n_edges_;
    return true;
  }

  const std::vector<std::size_t>& out_neighbors(std::size_t i) const { return out_[i]; }
  const std::vector<std::size_t>& in_neighbors(std::size_t i) const { return in_[i]; }
  std::size_t n_edges() const { return n_edges_; }

  Cell feature(std::size_t i, std::size_t l) const { return feats_[i * l_ + l]; }
  void set_feature(std::size_t i, std::size_t l, Cell c) { feats_[i * l_ + l] = c; }
  bool observed(std::size_t i, std::size_t l) const { return feature(i, l) != Cell::missing; }

  std::size_t n_observed(std::size_t i) const {
    std::size_t c = 0;
    for (std::size_t l = 0; l < l_; ++l) c += observed(i, l) ? 1 : 0;
    return c;
  }

  void hide_links(std::size_t i, bool hidden = true) {
    check_node(i);
    hidden_[i] = hidden ? 1 : 0;
  }
  bool links_hidden(std::size_t i) const { return hidden_[i] != 0; }

  /// True when the ordered pair (i, j) enters the network likelihood.
  bool pair_observed(std::size_t i, std::size_t j) const {
    return i != j && !hidden_[i] && !hidden_[j];
  }

  /// Edge count restricted to observed pairs.
  std::size_t n_observed_edges() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (hidden_[i]) continue;
      for (auto j : out_[i]) c += hidden_[j] ? 0 : 1;
    }
    return c;
  }

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < node_ids.size(); ++i)
      if (node_ids[i] == id) return i;
    throw DataError("unknown node id '" + id + "'");
  }

  std::vector<std::string> node_ids;
  std::vector<std::string> feature_names;

 private:
  void check_node(std::size_t i) const {
    if (i >= n_) throw DataError("node index " + std::to_string(i) + " out of range");
  }

  std::size_t n_ = 0;
  std::size_t l_ = 0;
  std::size_t n_edges_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<Cell> feats_;
  std::vector<std::uint8_t> hidden_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
};

/// 2x2 table indexed [source indicator][destination indicator].
using Table2 = std::array<std::array<double, 2>, 2>;

inline Table2 constant_table(double c) { return {{{c, c}, {c, c}}}; }

struct Memberships {
  Eigen::MatrixXd phi;  // N x K

  std::size_t groups() const { return static_cast<std::size_t>(phi.cols()); }
};

/// L x (K+1); the last column is the unpenalized intercept.
struct FeatureWeights {
  Eigen::MatrixXd w;

  std::size_t groups() const { return w.cols() == 0 ? 0 : static_cast<std::size_t>(w.cols() - 1); }
  std::size_t intercept_col() const { return groups(); }
  double intercept(std::size_t l) const { return w(static_cast<Eigen::Index>(l), w.cols() - 1); }

  std::size_t nonzero() const {
    std::size_t c = 0;
    for (Eigen::Index l = 0; l < w.rows(); ++l)
      for (Eigen::Index k = 0; k + 1 < w.cols(); ++k) c += w(l, k) != 0.0 ? 1 : 0;
    return c;
  }
};

struct AffinityTensor {
  std::vector<Table2> theta;

  std::size_t groups() const { return theta.size(); }
};

struct BetaPrior {
  double a = 1.0;
  double b = 1.0;
};

enum class PhiSweep { gauss_seidel, frozen };

/// How the feature part of the membership gradient treats nodes with missing cells.
enum class FeatureGradient {
  normalized,  // mean over observed cells when the node has any missing cell
  exact,       // plain sum; the true derivative of the objective
};

struct Hyperparams {
  std::vector<BetaPrior> alpha;  // one per group; a single entry is broadcast
  double lambda = 0.01;
  double gamma_phi = 0.005;
  double gamma_f = 0.005;
  double gamma_a = 0.005;
  double clamp_eps = 1e-4;
  std::size_t max_outer_iters = 500;
  double rel_tol = 1e-6;
  std::uint64_t seed = 1;
  bool backtrack = true;
  std::size_t inner_passes = 1;
  std::size_t threads = 1;
  std::size_t foldin_iters = 200;
  PhiSweep sweep = PhiSweep::gauss_seidel;
  FeatureGradient feature_gradient = FeatureGradient::normalized;

  BetaPrior prior(std::size_t k) const {
    if (alpha.empty()) return {};
    if (alpha.size() == 1) return alpha.front();
    return alpha.at(k);
  }

  /// Penalty weight on |W|_1 that the LASSO step actually descends: the
  /// step shrinks by lambda at step size gamma_f.
  double l1_weight() const { return lambda / gamma_f; }

  void validate() const {
    for (const auto& p : alpha)
      if (!(p.a > 0.0) || !(p.b > 0.0)) throw UsageError("Beta prior parameters must be positive");
    if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
    if (!(gamma_phi > 0.0) || !(gamma_f > 0.0) || !(gamma_a > 0.0))
      throw UsageError("learning rates must be positive");
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw UsageError("clamp eps must lie in (0, 0.5)");
    if (!(rel_tol >= 0.0)) throw UsageError("tolerance must be >= 0");
    if (inner_passes == 0) throw UsageError("inner passes must be >= 1");
    if (threads == 0) throw UsageError("threads must be >= 1");
  }
};

struct ModelState {
  Memberships memberships;
  FeatureWeights weights;
  AffinityTensor affinities;
  Hyperparams hyper;

  std::size_t n_nodes() const { return static_cast<std::size_t>(memberships.phi.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(weights.w.rows()); }
  std::size_t groups() const { return memberships.groups(); }

  const Eigen::MatrixXd& phi() const { return memberships.phi; }
  Eigen::MatrixXd& phi() { return memberships.phi; }
  const Eigen::MatrixXd& w() const { return weights.w; }
  Eigen::MatrixXd& w() { return weights.w; }
  const std::vector<Table2>& theta() const { return affinities.theta; }
  std::vector<Table2>& theta() { return affinities.theta; }

  void check_consistent() const {
    const auto k = groups();
    if (weights.groups() != k || affinities.groups() != k)
      throw DataError("group count differs across parameter blocks");
  }
};

inline double clamp_prob(double x, double eps) { return std::clamp(x, eps, 1.0 - eps); }

}  // namespace lmmg
