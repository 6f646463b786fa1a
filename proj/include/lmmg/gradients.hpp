// Analytic gradients of the surrogate objective.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lmmg/model.hpp"
#include "lmmg/parallel.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

struct PhiGradient {
  double d_prior = 0.0;
  double d_features = 0.0;
  double d_network = 0.0;
  double total = 0.0;
};

namespace detail {

struct PairFactors {
  double rest = 1.0;   // prod_{k' != k} E[Theta_k']
  double rest2 = 1.0;  // prod_{k' != k} E[Theta_k'^2]
};

inline PairFactors factors_except(const ModelState& s, Eigen::Index src, Eigen::Index dst,
                                  std::size_t skip, const std::vector<Table2>& sq) {
  PairFactors f;
  const auto& phi = s.phi();
  for (std::size_t k = 0; k < s.groups(); ++k) {
    if (k == skip) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    f.rest *= pair_expectation(phi(src, kk), phi(dst, kk), s.theta()[k]);
    f.rest2 *= pair_expectation(phi(src, kk), phi(dst, kk), sq[k]);
  }
  return f;
}

inline std::vector<Table2> squared_tables(const ModelState& s) {
  std::vector<Table2> sq;
  sq.reserve(s.groups());
  for (const auto& t : s.theta()) sq.push_back(squared_table(t));
  return sq;
}

inline void check_node(const Dataset& d, std::size_t i) {
  if (i >= d.n_nodes()) throw DataError("node index out of range");
}

}  // namespace detail

/// Feature part of dL/dphi_ik. With `normalized`, nodes that have a missing
/// cell use the mean over their observed cells instead of the sum.
inline double grad_phi_features(const ModelState& s, const Dataset& d, std::size_t i, std::size_t k,
                                FeatureGradient mode) {
  double acc = 0.0;
  std::size_t seen = 0;
  const auto kk = static_cast<Eigen::Index>(k);
  for (std::size_t l = 0; l < d.n_features(); ++l) {
    const auto c = d.feature(i, l);
    if (c == Cell::missing) continue;
    const double f = c == Cell::one ? 1.0 : 0.0;
    acc += (f - feature_prob(s, i, l)) * s.w()(static_cast<Eigen::Index>(l), kk);
    ++seen;
  }
  if (mode == FeatureGradient::normalized && seen < d.n_features())
    return seen == 0 ? 0.0 : acc / static_cast<double>(seen);
  return acc;
}

/// Network part of dL/dphi_ik: outgoing and incoming pairs, edge and non-edge.
inline double grad_phi_network(const ModelState& s, const Dataset& d, std::size_t i, std::size_t k) {
  const auto& phi = s.phi();
  const auto& t = s.theta()[k];
  const auto lt = log_table(t);
  const auto sq = detail::squared_tables(s);
  const auto& t2 = sq[k];
  const auto ii = static_cast<Eigen::Index>(i);
  const auto kk = static_cast<Eigen::Index>(k);

  double acc = 0.0;
  for (std::size_t j = 0; j < d.n_nodes(); ++j) {
    if (!d.pair_observed(i, j)) continue;
    const auto jj = static_cast<Eigen::Index>(j);
    const double pj = phi(jj, kk);

    // i is the source of i -> j
    if (d.edge(i, j)) {
      acc += pj * lt[1][1] + (1.0 - pj) * lt[1][0] - pj * lt[0][1] - (1.0 - pj) * lt[0][0];
    } else {
      const auto f = detail::factors_except(s, ii, jj, k, sq);
      const double de = pj * (t[1][1] - t[0][1]) + (1.0 - pj) * (t[1][0] - t[0][0]);
      const double de2 = pj * (t2[1][1] - t2[0][1]) + (1.0 - pj) * (t2[1][0] - t2[0][0]);
      acc -= f.rest * de + 0.5 * f.rest2 * de2;
    }

    // i is the destination of j -> i
    if (d.edge(j, i)) {
      acc += pj * lt[1][1] + (1.0 - pj) * lt[0][1] - pj * lt[1][0] - (1.0 - pj) * lt[0][0];
    } else {
      const auto f = detail::factors_except(s, jj, ii, k, sq);
      const double de = pj * (t[1][1] - t[1][0]) + (1.0 - pj) * (t[0][1] - t[0][0]);
      const double de2 = pj * (t2[1][1] - t2[1][0]) + (1.0 - pj) * (t2[0][1] - t2[0][0]);
      acc -= f.rest * de + 0.5 * f.rest2 * de2;
    }
  }
  return acc;
}

inline double grad_phi_prior(const ModelState& s, std::size_t i, std::size_t k) {
  const auto a = s.hyper.prior(k);
  const double p = s.phi()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  return (a.a - 1.0) / p - (a.b - 1.0) / (1.0 - p);
}

inline PhiGradient grad_phi(const ModelState& s, const Dataset& d, std::size_t i, std::size_t k,
                            FeatureGradient mode) {
  detail::check_node(d, i);
  if (k >= s.groups()) throw DataError("group index out of range");
  PhiGradient g;
  g.d_prior = grad_phi_prior(s, i, k);
  g.d_features = grad_phi_features(s, d, i, k, mode);
  g.d_network = grad_phi_network(s, d, i, k);
  g.total = g.d_prior + g.d_features + g.d_network;
  return g;
}

inline PhiGradient grad_phi(const ModelState& s, const Dataset& d, std::size_t i, std::size_t k) {
  return grad_phi(s, d, i, k, s.hyper.feature_gradient);
}

/// dL_F/dw_lk; k == K addresses the intercept column.
inline double grad_w(const ModelState& s, const Dataset& d, std::size_t l, std::size_t k) {
  if (l >= d.n_features() || k > s.groups()) throw DataError("weight index out of range");
  const bool intercept = k == s.groups();
  double acc = 0.0;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    const auto c = d.feature(i, l);
    if (c == Cell::missing) continue;
    const double x = intercept ? 1.0 : s.phi()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    acc += ((c == Cell::one ? 1.0 : 0.0) - feature_prob(s, i, l)) * x;
  }
  return acc;
}

/// Gradient of the whole weight row l; index K is the intercept.
inline Eigen::VectorXd grad_w_row(const ModelState& s, const Dataset& d, std::size_t l) {
  const auto k = static_cast<Eigen::Index>(s.groups());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(k + 1);
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    const auto c = d.feature(i, l);
    if (c == Cell::missing) continue;
    const double r = (c == Cell::one ? 1.0 : 0.0) - feature_prob(s, i, l);
    g.head(k) += r * s.phi().row(static_cast<Eigen::Index>(i)).transpose();
    g(k) += r;
  }
  return g;
}

/// One sparse LASSO-style update of a single weight.
///
/// An inactive weight (w_old == 0) stays at zero unless gamma * |grad|
/// exceeds lambda. An active weight that would change sign is reset to zero.
inline double lasso_step(double w_old, double grad, double gamma, double lambda) {
  const auto sign = [](double x) { return (x > 0.0) - (x < 0.0); };
  if (w_old == 0.0) {
    if (gamma * std::abs(grad) <= lambda) return 0.0;
    return gamma * grad - lambda * sign(grad);
  }
  const double cand = w_old + gamma * grad - lambda * sign(w_old);
  if (sign(cand) != sign(w_old)) return 0.0;
  return cand;
}

/// dL_A/dTheta_k[x1][x2] over all observed ordered pairs.
/// dL/dTheta_k for every group in one sweep over the observed pairs.
inline std::vector<Table2> grad_theta_all(const ModelState& s, const Dataset& d) {
  const std::size_t n = d.n_nodes();
  const std::size_t groups = s.groups();
  const auto sq = detail::squared_tables(s);
  std::vector<std::vector<Table2>> rows(n);

  detail::for_each_row(n, s.hyper.threads, [&](std::size_t i) {
    std::vector<Table2> acc(groups, constant_table(0.0));
    std::vector<Table2> wt(groups);
    std::vector<double> m1(groups), m2(groups), rest1(groups), rest2(groups);
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (!d.pair_observed(i, j)) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      for (std::size_t k = 0; k < groups; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        wt[k] = indicator_weights(s.phi()(ii, kk), s.phi()(jj, kk));
      }
      if (d.edge(i, j)) {
        for (std::size_t k = 0; k < groups; ++k) {
          const auto& t = s.theta()[k];
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) acc[k][a][b] += wt[k][a][b] / t[a][b];
        }
        continue;
      }
      for (std::size_t k = 0; k < groups; ++k) {
        const auto& t = s.theta()[k];
        m1[k] = wt[k][0][0] * t[0][0] + wt[k][0][1] * t[0][1] + wt[k][1][0] * t[1][0] + wt[k][1][1] * t[1][1];
        const auto& t2 = sq[k];
        m2[k] = wt[k][0][0] * t2[0][0] + wt[k][0][1] * t2[0][1] + wt[k][1][0] * t2[1][0] + wt[k][1][1] * t2[1][1];
      }
      // products over all other groups: prefix then suffix
      double p1 = 1.0, p2 = 1.0;
      for (std::size_t k = 0; k < groups; ++k) {
        rest1[k] = p1;
        rest2[k] = p2;
        p1 *= m1[k];
        p2 *= m2[k];
      }
      p1 = 1.0;
      p2 = 1.0;
      for (std::size_t k = groups; k-- > 0;) {
        rest1[k] *= p1;
        rest2[k] *= p2;
        p1 *= m1[k];
        p2 *= m2[k];
      }
      for (std::size_t k = 0; k < groups; ++k) {
        const auto& t = s.theta()[k];
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) acc[k][a][b] -= rest1[k] * wt[k][a][b] + rest2[k] * t[a][b] * wt[k][a][b];
      }
    }
    rows[i] = std::move(acc);
  });

  std::vector<Table2> g(groups, constant_table(0.0));
  for (const auto& r : rows)
    for (std::size_t k = 0; k < groups; ++k)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) g[k][a][b] += r[k][a][b];
  return g;
}

inline Table2 grad_theta(const ModelState& s, const Dataset& d, std::size_t k) {
  if (k >= s.groups()) throw DataError("group index out of range");
  return grad_theta_all(s, d)[k];
}

}  // namespace lmmg
