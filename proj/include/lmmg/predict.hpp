// Missing-feature prediction, held-out-node link prediction and node
// classification on top of a fitted model.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lmmg/fit.hpp"
#include "lmmg/gradients.hpp"
#include "lmmg/model.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

enum class Observe { features_only, links_only, both };

enum class PredictionTarget { features, links, label };

struct PredictionResult {
  PredictionTarget target = PredictionTarget::features;
  std::size_t node = 0;
  std::vector<std::pair<std::size_t, double>> scores;
  std::vector<std::pair<std::size_t, double>> incoming;  // links only: E[p_ju]
  std::optional<double> loglik;
};

namespace detail {

inline double node_feature_objective(const ModelState& s, const Dataset& d, std::size_t u) {
  const std::size_t seen = d.n_observed(u);
  const double sum = node_feature_term(s, d, u);
  if (seen == 0) return 0.0;
  return seen < d.n_features() ? sum / static_cast<double>(seen) : sum;
}

inline double node_prior(const ModelState& s, std::size_t u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < s.groups(); ++k) {
    const auto a = s.hyper.prior(k);
    const double p = s.phi()(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(k));
    acc += (a.a - 1.0) * std::log(p) + (a.b - 1.0) * std::log1p(-p);
  }
  return acc;
}

// The part of the objective that depends on phi_u, restricted to the
// observed channels. Its gradient is exactly the fold-in update direction.
inline double node_objective(const ModelState& s, const Dataset& d, std::size_t u, Observe obs) {
  double acc = node_prior(s, u);
  if (obs != Observe::links_only) acc += node_feature_objective(s, d, u);
  if (obs != Observe::features_only) acc += node_network_term(s, d, u);
  return acc;
}

inline double node_gradient(const ModelState& s, const Dataset& d, std::size_t u, std::size_t k, Observe obs) {
  double g = grad_phi_prior(s, u, k);
  if (obs != Observe::links_only) g += grad_phi_features(s, d, u, k, FeatureGradient::normalized);
  if (obs != Observe::features_only) g += grad_phi_network(s, d, u, k);
  return g;
}

}  // namespace detail

/// Estimates the membership row of node u from its observed channels while
/// every other parameter stays frozen. Starts from 0.5 in every group.
inline Eigen::RowVectorXd fold_in_node(const ModelState& model, const Dataset& d, std::size_t u, Observe obs) {
  if (u >= d.n_nodes() || u >= model.n_nodes()) throw DataError("unknown node index " + std::to_string(u));
  ModelState s = model;
  const auto uu = static_cast<Eigen::Index>(u);
  const auto& h = s.hyper;
  s.phi().row(uu).setConstant(0.5);

  double current = detail::node_objective(s, d, u, obs);
  for (std::size_t it = 0; it < h.foldin_iters; ++it) {
    const double prev = current;
    const Eigen::RowVectorXd before = s.phi().row(uu);
    double rate = h.gamma_phi;
    for (int attempt = 0; attempt <= detail::kMaxHalvings; ++attempt) {
      for (std::size_t k = 0; k < s.groups(); ++k) {
        auto& p = s.phi()(uu, static_cast<Eigen::Index>(k));
        p = clamp_prob(p + rate * detail::node_gradient(s, d, u, k, obs), h.clamp_eps);
      }
      const double next = detail::node_objective(s, d, u, obs);
      if (!std::isfinite(next)) throw NumericError("non-finite objective during fold-in");
      if (!h.backtrack || next >= current) {
        current = next;
        break;
      }
      s.phi().row(uu) = before;
      rate *= 0.5;
    }
    if (std::abs(current - prev) <= h.rel_tol * std::max(std::abs(prev), 1e-300)) break;
  }
  return s.phi().row(uu);
}

/// Scores every missing feature of u after folding u in from its links and
/// its observed features. `truth`, when non-empty, holds the held-out cells
/// (length L) and yields the log-likelihood of the masked ones.
inline PredictionResult predict_missing_features(const ModelState& model, const Dataset& d, std::size_t u,
                                                 std::span<const Cell> truth = {}) {
  if (u >= d.n_nodes()) throw DataError("unknown node index " + std::to_string(u));
  if (!truth.empty() && truth.size() != d.n_features()) throw DataError("truth row has wrong length");
  ModelState s = model;
  s.phi().row(static_cast<Eigen::Index>(u)) = fold_in_node(model, d, u, Observe::both);

  PredictionResult r;
  r.target = PredictionTarget::features;
  r.node = u;
  double ll = 0.0;
  bool any_truth = false;
  for (std::size_t l = 0; l < d.n_features(); ++l) {
    if (d.observed(u, l)) continue;
    r.scores.emplace_back(l, feature_prob(s, u, l));
    if (!truth.empty() && truth[l] != Cell::missing) {
      ll += feature_loglik(s, u, l, truth[l] == Cell::one);
      any_truth = true;
    }
  }
  if (any_truth) r.loglik = ll;
  return r;
}

/// Link scores for a node whose links were hidden while fitting. The node is
/// folded in from its features only; the true adjacency (still stored in
/// `d`) yields the log-likelihood over both directions.
inline PredictionResult predict_links(const ModelState& model, const Dataset& d, std::size_t u) {
  if (u >= d.n_nodes()) throw DataError("unknown node index " + std::to_string(u));
  if (!d.links_hidden(u)) throw DataError("node " + d.node_ids[u] + " was not held out during fitting");
  ModelState s = model;
  s.phi().row(static_cast<Eigen::Index>(u)) = fold_in_node(model, d, u, Observe::features_only);

  PredictionResult r;
  r.target = PredictionTarget::links;
  r.node = u;
  double ll = 0.0;
  for (std::size_t j = 0; j < d.n_nodes(); ++j) {
    if (j == u) continue;
    const double out = expected_edge_prob(s, u, j);
    const double in = expected_edge_prob(s, j, u);
    r.scores.emplace_back(j, out);
    r.incoming.emplace_back(j, in);
    ll += std::log(std::clamp(d.edge(u, j) ? out : 1.0 - out, 1e-12, 1.0));
    ll += std::log(std::clamp(d.edge(j, u) ? in : 1.0 - in, 1e-12, 1.0));
  }
  r.loglik = ll;
  return r;
}

/// Probability that at least one direction of the pair is linked.
inline double undirected_score(double out, double in) { return 1.0 - (1.0 - out) * (1.0 - in); }

/// Fits once with the label column hidden on test nodes and reports the
/// class-1 probability of every test node.
inline std::vector<PredictionResult> classify_nodes(const Dataset& data, std::size_t label, const std::vector<bool>& train_mask,
                                                    std::size_t k, const Hyperparams& hyper) {
  if (label >= data.n_features()) throw DataError("label column out of range");
  if (train_mask.size() != data.n_nodes()) throw DataError("train mask has wrong length");
  Dataset d = data;
  bool any_label = false;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    if (!train_mask[i]) d.set_feature(i, label, Cell::missing);
    any_label = any_label || d.observed(i, label);
  }
  if (!any_label) throw DataError("label column has no observed training value");

  const auto [model, report] = fit(d, k, hyper);
  std::vector<PredictionResult> out;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    if (train_mask[i]) continue;
    PredictionResult r;
    r.target = PredictionTarget::label;
    r.node = i;
    const double p = feature_prob(model, i, label);
    r.scores.emplace_back(label, p);
    const auto truth = data.feature(i, label);
    if (truth != Cell::missing) r.loglik = feature_loglik(model, i, label, truth == Cell::one);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lmmg
