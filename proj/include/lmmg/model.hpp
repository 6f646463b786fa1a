// Closed-form expectations under independent Bernoulli indicators and the
// surrogate objective that the fitter ascends.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lmmg/parallel.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

/// E f(z_i, z_j) for z_i ~ Bernoulli(phi_i), z_j ~ Bernoulli(phi_j) independent.
inline double pair_expectation(double phi_i, double phi_j, const Table2& f) {
  return phi_i * phi_j * f[1][1] + phi_i * (1.0 - phi_j) * f[1][0] +
         (1.0 - phi_i) * phi_j * f[0][1] + (1.0 - phi_i) * (1.0 - phi_j) * f[0][0];
}

/// P[z_i = x1] * P[z_j = x2] for every (x1, x2).
inline Table2 indicator_weights(double phi_i, double phi_j) {
  return {{{(1.0 - phi_i) * (1.0 - phi_j), (1.0 - phi_i) * phi_j},
           {phi_i * (1.0 - phi_j), phi_i * phi_j}}};
}

inline Table2 log_table(const Table2& t) {
  return {{{std::log(t[0][0]), std::log(t[0][1])}, {std::log(t[1][0]), std::log(t[1][1])}}};
}

inline Table2 squared_table(const Table2& t) {
  return {{{t[0][0] * t[0][0], t[0][1] * t[0][1]}, {t[1][0] * t[1][0], t[1][1] * t[1][1]}}};
}

/// E[p_ij^power] for the ordered pair i -> j; power is 1 or 2.
inline double expected_edge_prob(const ModelState& s, std::size_t i, std::size_t j, int power = 1) {
  if (i == j) throw DataError("self-pairs have no edge probability");
  if (power != 1 && power != 2) throw UsageError("power must be 1 or 2");
  const auto& phi = s.phi();
  double p = 1.0;
  for (std::size_t k = 0; k < s.groups(); ++k) {
    const auto& t = s.theta()[k];
    const auto kk = static_cast<Eigen::Index>(k);
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    p *= pair_expectation(phi(ii, kk), phi(jj, kk), power == 1 ? t : squared_table(t));
  }
  return p;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log sigmoid(x), stable for large |x|.
inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double feature_logit(const ModelState& s, std::size_t i, std::size_t l) {
  const auto ii = static_cast<Eigen::Index>(i);
  const auto ll = static_cast<Eigen::Index>(l);
  const auto k = static_cast<Eigen::Index>(s.groups());
  return s.w().row(ll).head(k).dot(s.phi().row(ii)) + s.w()(ll, k);
}

/// y_il = sigmoid(sum_k w_lk phi_ik + intercept_l).
inline double feature_prob(const ModelState& s, std::size_t i, std::size_t l) {
  return sigmoid(feature_logit(s, i, l));
}

/// log P(F_il = value) under the logistic feature model.
inline double feature_loglik(const ModelState& s, std::size_t i, std::size_t l, bool value) {
  const double x = feature_logit(s, i, l);
  return value ? log_sigmoid(x) : log_sigmoid(-x);
}

struct ObjectiveBreakdown {
  double l_phi = 0.0;
  double l_f = 0.0;
  double l_a_surrogate = 0.0;
  double l1_penalty = 0.0;
  double total = 0.0;
};

inline double prior_term(const ModelState& s) {
  double acc = 0.0;
  for (std::size_t k = 0; k < s.groups(); ++k) {
    const auto a = s.hyper.prior(k);
    if (a.a == 1.0 && a.b == 1.0) continue;
    for (Eigen::Index i = 0; i < s.phi().rows(); ++i) {
      const double p = s.phi()(i, static_cast<Eigen::Index>(k));
      acc += (a.a - 1.0) * std::log(p) + (a.b - 1.0) * std::log1p(-p);
    }
  }
  return acc;
}

inline double node_feature_term(const ModelState& s, const Dataset& d, std::size_t i) {
  double acc = 0.0;
  for (std::size_t l = 0; l < d.n_features(); ++l) {
    const auto c = d.feature(i, l);
    if (c == Cell::missing) continue;
    acc += feature_loglik(s, i, l, c == Cell::one);
  }
  return acc;
}

inline double feature_term(const ModelState& s, const Dataset& d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) acc += node_feature_term(s, d, i);
  return acc;
}

namespace detail {

struct TableCache {
  std::vector<Table2> log;
  std::vector<Table2> sq;

  explicit TableCache(const ModelState& s) {
    log.reserve(s.groups());
    sq.reserve(s.groups());
    for (const auto& t : s.theta()) {
      log.push_back(log_table(t));
      sq.push_back(squared_table(t));
    }
  }
};

inline double pair_term_cached(const ModelState& s, const Dataset& d, const TableCache& c, std::size_t i, std::size_t j) {
  const auto& phi = s.phi();
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  if (d.edge(i, j)) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.groups(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      acc += pair_expectation(phi(ii, kk), phi(jj, kk), c.log[k]);
    }
    return acc;
  }
  double p1 = 1.0;
  double p2 = 1.0;
  for (std::size_t k = 0; k < s.groups(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const auto w = indicator_weights(phi(ii, kk), phi(jj, kk));
    const auto& t = s.theta()[k];
    const auto& t2 = c.sq[k];
    p1 *= w[0][0] * t[0][0] + w[0][1] * t[0][1] + w[1][0] * t[1][0] + w[1][1] * t[1][1];
    p2 *= w[0][0] * t2[0][0] + w[0][1] * t2[0][1] + w[1][0] * t2[1][0] + w[1][1] * t2[1][1];
  }
  return -p1 - 0.5 * p2;
}

}  // namespace detail

/// Network contribution of one ordered, observed pair. Edges use the exact
/// E[log p]; non-edges use the second-order expansion -E[p] - E[p^2]/2.
inline double pair_term(const ModelState& s, const Dataset& d, std::size_t i, std::size_t j) {
  return detail::pair_term_cached(s, d, detail::TableCache(s), i, j);
}

/// Sum of pair_term over every observed ordered pair touching node u.
inline double node_network_term(const ModelState& s, const Dataset& d, std::size_t u) {
  const detail::TableCache c(s);
  double acc = 0.0;
  for (std::size_t j = 0; j < d.n_nodes(); ++j) {
    if (!d.pair_observed(u, j)) continue;
    acc += detail::pair_term_cached(s, d, c, u, j);
    acc += detail::pair_term_cached(s, d, c, j, u);
  }
  return acc;
}

inline double network_term(const ModelState& s, const Dataset& d, std::size_t threads = 1) {
  const std::size_t n = d.n_nodes();
  const detail::TableCache c(s);
  std::vector<double> rows(n, 0.0);
  detail::for_each_row(n, threads, [&](std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (d.pair_observed(i, j)) acc += detail::pair_term_cached(s, d, c, i, j);
    rows[i] = acc;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

inline double l1_norm(const FeatureWeights& fw) {
  double acc = 0.0;
  for (Eigen::Index l = 0; l < fw.w.rows(); ++l)
    for (Eigen::Index k = 0; k + 1 < fw.w.cols(); ++k) acc += std::abs(fw.w(l, k));
  return acc;
}

inline ObjectiveBreakdown objective(const ModelState& s, const Dataset& d) {
  ObjectiveBreakdown o;
  o.l_phi = prior_term(s);
  o.l_f = feature_term(s, d);
  o.l_a_surrogate = network_term(s, d, s.hyper.threads);
  o.l1_penalty = s.hyper.l1_weight() * l1_norm(s.weights);
  o.total = o.l_phi + o.l_f + o.l_a_surrogate - o.l1_penalty;
  return o;
}

/// Checks the shape and range invariants of a state against a dataset.
inline void validate_state(const ModelState& s, const Dataset& d) {
  s.check_consistent();
  s.hyper.validate();
  if (s.n_nodes() != d.n_nodes()) throw DataError("membership rows do not match node count");
  if (s.n_features() != d.n_features()) throw DataError("weight rows do not match feature count");
  const double eps = s.hyper.clamp_eps;
  const double slack = 1e-12;
  for (Eigen::Index i = 0; i < s.phi().rows(); ++i)
    for (Eigen::Index k = 0; k < s.phi().cols(); ++k) {
      const double p = s.phi()(i, k);
      if (!(p >= eps - slack && p <= 1.0 - eps + slack))
        throw DataError("membership outside [eps, 1-eps] at node " + std::to_string(i));
    }
  for (const auto& t : s.theta())
    for (const auto& row : t)
      for (double v : row)
        if (!(v >= eps - slack && v <= 1.0 - eps + slack)) throw DataError("affinity outside [eps, 1-eps]");
  if (!s.w().allFinite()) throw DataError("non-finite feature weight");
}

}  // namespace lmmg
