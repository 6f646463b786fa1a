// Reference predictors: marginal averaging (AVG), neighbor-majority naive
// Bayes (CC-N) and neighbor-mean logistic regression (CC-L).
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "lmmg/model.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

struct FeatureTarget {
  std::size_t node;
  std::size_t feature;
};

struct LinkTarget {
  std::size_t node;  // source
  std::size_t dest;
};

namespace detail {

inline double observed_feature_mean(const Dataset& d, std::size_t exclude) {
  double ones = 0.0;
  double seen = 0.0;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    if (i == exclude) continue;
    for (std::size_t l = 0; l < d.n_features(); ++l) {
      if (!d.observed(i, l)) continue;
      ones += d.feature(i, l) == Cell::one ? 1.0 : 0.0;
      seen += 1.0;
    }
  }
  return seen > 0.0 ? ones / seen : 0.5;
}

inline double column_marginal(const Dataset& d, std::size_t l) {
  double ones = 0.0;
  double seen = 0.0;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    if (!d.observed(i, l)) continue;
    ones += d.feature(i, l) == Cell::one ? 1.0 : 0.0;
    seen += 1.0;
  }
  return seen > 0.0 ? ones / seen : 0.5;
}

/// Observed neighbors of v in either direction, each listed once.
inline std::vector<std::size_t> neighbors(const Dataset& d, std::size_t v) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < d.n_nodes(); ++j)
    if (d.pair_observed(v, j) && (d.edge(v, j) || d.edge(j, v))) out.push_back(j);
  return out;
}

constexpr double kUnavailable = std::numeric_limits<double>::quiet_NaN();

}  // namespace detail

/// AVG for a feature: the fraction of other nodes whose observed cell is 1.
inline double baseline_avg(const Dataset& d, FeatureTarget t) {
  double ones = 0.0;
  double seen = 0.0;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    if (i == t.node || !d.observed(i, t.feature)) continue;
    ones += d.feature(i, t.feature) == Cell::one ? 1.0 : 0.0;
    seen += 1.0;
  }
  if (seen > 0.0) return ones / seen;
  return detail::observed_feature_mean(d, t.node);
}

/// AVG for a link u -> j: the fraction of other observed sources linking to j.
inline double baseline_avg(const Dataset& d, LinkTarget t) {
  double hits = 0.0;
  double seen = 0.0;
  for (std::size_t s = 0; s < d.n_nodes(); ++s) {
    if (s == t.node || !d.pair_observed(s, t.dest)) continue;
    hits += d.edge(s, t.dest) ? 1.0 : 0.0;
    seen += 1.0;
  }
  if (seen > 0.0) return hits / seen;
  double edges = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < d.n_nodes(); ++i)
    for (std::size_t j = 0; j < d.n_nodes(); ++j) {
      if (i == t.node || !d.pair_observed(i, j)) continue;
      edges += d.edge(i, j) ? 1.0 : 0.0;
      pairs += 1.0;
    }
  return pairs > 0.0 ? edges / pairs : 0.5;
}

/// AVG for a link j -> u into a held-out node u, whose column is unobserved:
/// the fraction of other observed destinations that j links to.
inline double baseline_avg_incoming(const Dataset& d, LinkTarget t) {
  const std::size_t src = t.node;
  const std::size_t hidden = t.dest;
  double hits = 0.0;
  double seen = 0.0;
  for (std::size_t j = 0; j < d.n_nodes(); ++j) {
    if (j == hidden || !d.pair_observed(src, j)) continue;
    hits += d.edge(src, j) ? 1.0 : 0.0;
    seen += 1.0;
  }
  return seen > 0.0 ? hits / seen : baseline_avg(d, t);
}

/// Training rows and the query row for a relational classifier. One column
/// per evidence channel; NaN marks a channel unavailable for that row.
/// Channels unavailable for the query are already dropped.
struct Evidence {
  std::vector<std::vector<double>> rows;
  std::vector<bool> labels;
  std::vector<double> query;
};

enum class NeighborSummary { majority, mean };

/// Majority (ties: the column marginal rounded, 0.5 rounds up) or mean of the
/// neighbors' observed values of feature m; NaN when no neighbor has one.
inline double neighbor_summary(const Dataset& d, std::size_t v, std::size_t m, NeighborSummary how) {
  double ones = 0.0;
  double seen = 0.0;
  for (auto j : detail::neighbors(d, v)) {
    if (!d.observed(j, m)) continue;
    ones += d.feature(j, m) == Cell::one ? 1.0 : 0.0;
    seen += 1.0;
  }
  if (seen == 0.0) return detail::kUnavailable;
  if (how == NeighborSummary::mean) return ones / seen;
  if (2.0 * ones > seen) return 1.0;
  if (2.0 * ones < seen) return 0.0;
  return detail::column_marginal(d, m) >= 0.5 ? 1.0 : 0.0;
}

namespace detail {

inline Evidence restrict_to_query(std::vector<std::vector<double>> rows, std::vector<bool> labels,
                                  const std::vector<double>& query) {
  Evidence e;
  e.labels = std::move(labels);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < query.size(); ++c)
    if (!std::isnan(query[c])) keep.push_back(c);
  for (auto c : keep) e.query.push_back(query[c]);
  e.rows.reserve(rows.size());
  for (auto& r : rows) {
    std::vector<double> kept;
    kept.reserve(keep.size());
    for (auto c : keep) kept.push_back(r[c]);
    e.rows.push_back(std::move(kept));
  }
  return e;
}

inline std::vector<double> feature_row(const Dataset& d, std::size_t v, std::size_t skip, NeighborSummary how) {
  std::vector<double> row;
  row.reserve(2 * d.n_features());
  for (std::size_t m = 0; m < d.n_features(); ++m) {
    if (m == skip) continue;
    row.push_back(d.observed(v, m) ? (d.feature(v, m) == Cell::one ? 1.0 : 0.0) : kUnavailable);
  }
  for (std::size_t m = 0; m < d.n_features(); ++m) row.push_back(neighbor_summary(d, v, m, how));
  return row;
}

}  // namespace detail

/// Evidence for predicting feature t.feature of t.node: the node's own other
/// observed features plus a neighbor summary of every feature. Training rows
/// are the other nodes with the target feature observed.
inline Evidence feature_evidence(const Dataset& d, FeatureTarget t, NeighborSummary how) {
  std::vector<std::vector<double>> rows;
  std::vector<bool> labels;
  for (std::size_t v = 0; v < d.n_nodes(); ++v) {
    if (v == t.node || !d.observed(v, t.feature)) continue;
    rows.push_back(detail::feature_row(d, v, t.feature, how));
    labels.push_back(d.feature(v, t.feature) == Cell::one);
  }
  return detail::restrict_to_query(std::move(rows), std::move(labels),
                                   detail::feature_row(d, t.node, t.feature, how));
}

/// Evidence for a link u -> j: own features of the source. Training rows are
/// the other observed sources s with label A_sj.
inline Evidence link_evidence(const Dataset& d, LinkTarget t) {
  const auto own = [&](std::size_t v) {
    std::vector<double> row;
    for (std::size_t m = 0; m < d.n_features(); ++m)
      row.push_back(d.observed(v, m) ? (d.feature(v, m) == Cell::one ? 1.0 : 0.0) : detail::kUnavailable);
    return row;
  };
  std::vector<std::vector<double>> rows;
  std::vector<bool> labels;
  for (std::size_t s = 0; s < d.n_nodes(); ++s) {
    if (s == t.node || !d.pair_observed(s, t.dest)) continue;
    rows.push_back(own(s));
    labels.push_back(d.edge(s, t.dest));
  }
  return detail::restrict_to_query(std::move(rows), std::move(labels), own(t.node));
}

/// Naive Bayes posterior P(y = 1 | query) over binary channels with add-one
/// smoothing on the class prior and on every per-channel likelihood.
inline double naive_bayes_posterior(const Evidence& e) {
  double n1 = 0.0;
  for (bool y : e.labels) n1 += y ? 1.0 : 0.0;
  const double n = static_cast<double>(e.labels.size());
  double log1 = std::log((n1 + 1.0) / (n + 2.0));
  double log0 = std::log((n - n1 + 1.0) / (n + 2.0));
  for (std::size_t c = 0; c < e.query.size(); ++c) {
    const bool x = e.query[c] >= 0.5;
    double match1 = 0.0, avail1 = 0.0, match0 = 0.0, avail0 = 0.0;
    for (std::size_t r = 0; r < e.rows.size(); ++r) {
      const double v = e.rows[r][c];
      if (std::isnan(v)) continue;
      const bool same = (v >= 0.5) == x;
      if (e.labels[r]) {
        avail1 += 1.0;
        match1 += same ? 1.0 : 0.0;
      } else {
        avail0 += 1.0;
        match0 += same ? 1.0 : 0.0;
      }
    }
    log1 += std::log((match1 + 1.0) / (avail1 + 2.0));
    log0 += std::log((match0 + 1.0) / (avail0 + 2.0));
  }
  return sigmoid(log1 - log0);
}

struct LogisticModel {
  std::vector<std::size_t> channels;  // evidence columns that entered the fit
  std::vector<double> coef;           // one per entry of `channels`
  double intercept = 0.0;
  std::vector<double> impute;         // per evidence column, for unavailable cells
  std::size_t iterations = 0;
  bool converged = false;

  double predict(const std::vector<double>& x) const {
    double z = intercept;
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const double v = x[channels[c]];
      z += coef[c] * (std::isnan(v) ? impute[channels[c]] : v);
    }
    return sigmoid(z);
  }
};

/// Unregularized logistic regression by full-batch gradient ascent until the
/// largest gradient component drops below `tol`. Unavailable cells take the
/// column's mean; columns constant over the training rows are dropped, so
/// all-identical evidence leaves an intercept-only model.
inline LogisticModel fit_logistic(const Evidence& e, double tol = 1e-8, std::size_t max_iters = 2000000) {
  LogisticModel m;
  const std::size_t p = e.query.size();
  const std::size_t n = e.rows.size();
  m.impute.assign(p, 0.0);
  for (std::size_t c = 0; c < p; ++c) {
    double sum = 0.0, seen = 0.0;
    for (const auto& r : e.rows)
      if (!std::isnan(r[c])) {
        sum += r[c];
        seen += 1.0;
      }
    m.impute[c] = seen > 0.0 ? sum / seen : 0.0;
    bool constant = true;
    for (std::size_t r = 1; r < n && constant; ++r) {
      const double a = std::isnan(e.rows[r][c]) ? m.impute[c] : e.rows[r][c];
      const double b = std::isnan(e.rows[0][c]) ? m.impute[c] : e.rows[0][c];
      constant = a == b;
    }
    if (!constant) m.channels.push_back(c);
  }
  if (n == 0) return m;

  const std::size_t q = m.channels.size();
  std::vector<std::vector<double>> x(n, std::vector<double>(q));
  double lipschitz = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 1.0;
    for (std::size_t c = 0; c < q; ++c) {
      const double v = e.rows[r][m.channels[c]];
      x[r][c] = std::isnan(v) ? m.impute[m.channels[c]] : v;
      sq += x[r][c] * x[r][c];
    }
    lipschitz += 0.25 * sq;
  }
  const double step = 1.0 / lipschitz;

  m.coef.assign(q, 0.0);
  std::vector<double> grad(q);
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double g0 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double z = m.intercept;
      for (std::size_t c = 0; c < q; ++c) z += m.coef[c] * x[r][c];
      const double res = (e.labels[r] ? 1.0 : 0.0) - sigmoid(z);
      g0 += res;
      for (std::size_t c = 0; c < q; ++c) grad[c] += res * x[r][c];
    }
    double gmax = std::abs(g0);
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    m.iterations = it;
    if (gmax < tol) {
      m.converged = true;
      break;
    }
    m.intercept += step * g0;
    for (std::size_t c = 0; c < q; ++c) m.coef[c] += step * grad[c];
  }
  return m;
}

/// CC-N: smoothed naive Bayes on own features and neighbor majorities.
inline double baseline_ccn(const Dataset& d, FeatureTarget t) {
  return naive_bayes_posterior(feature_evidence(d, t, NeighborSummary::majority));
}
inline double baseline_ccn(const Dataset& d, LinkTarget t) { return naive_bayes_posterior(link_evidence(d, t)); }

/// CC-L: logistic regression on own features and neighbor means.
inline double baseline_ccl(const Dataset& d, FeatureTarget t) {
  const auto e = feature_evidence(d, t, NeighborSummary::mean);
  return fit_logistic(e).predict(e.query);
}
inline double baseline_ccl(const Dataset& d, LinkTarget t) {
  const auto e = link_evidence(d, t);
  return fit_logistic(e).predict(e.query);
}

}  // namespace lmmg
