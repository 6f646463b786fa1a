// Initialization: truncated SVD of the feature matrix for memberships and
// weights, edge-weighted ratios plus global rescaling for the affinities.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "lmmg/log.hpp"
#include "lmmg/model.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

struct TruncatedSvd {
  Eigen::VectorXd sigma;  // descending
  Eigen::MatrixXd u;      // N x K
  Eigen::MatrixXd v;      // L x K
};

/// Feature matrix with missing cells replaced by the column's observed mean
/// (0.5 for a column with no observed cell).
inline Eigen::MatrixXd imputed_features(const Dataset& d) {
  const auto n = static_cast<Eigen::Index>(d.n_nodes());
  const auto l = static_cast<Eigen::Index>(d.n_features());
  Eigen::MatrixXd x(n, l);
  for (Eigen::Index c = 0; c < l; ++c) {
    double sum = 0.0;
    std::size_t seen = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto cell = d.feature(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
      if (cell == Cell::missing) continue;
      sum += cell == Cell::one ? 1.0 : 0.0;
      ++seen;
    }
    const double mean = seen ? sum / static_cast<double>(seen) : 0.5;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto cell = d.feature(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
      x(i, c) = cell == Cell::missing ? mean : (cell == Cell::one ? 1.0 : 0.0);
    }
  }
  return x;
}

/// Rank-k SVD by power iteration on the Gram matrix X^T X with deflation.
/// Each right singular vector is signed so its largest-magnitude entry is
/// positive. Components with negligible singular value come back as zeros.
inline TruncatedSvd truncated_svd(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed) {
  const auto l = x.cols();
  const auto kk = static_cast<Eigen::Index>(k);
  TruncatedSvd out{Eigen::VectorXd::Zero(kk), Eigen::MatrixXd::Zero(x.rows(), kk),
                   Eigen::MatrixXd::Zero(l, kk)};
  Eigen::MatrixXd gram = x.transpose() * x;
  const double scale = std::max(gram.cwiseAbs().maxCoeff(), 1.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (Eigen::Index c = 0; c < kk; ++c) {
    Eigen::VectorXd v(l);
    for (Eigen::Index r = 0; r < l; ++r) v(r) = normal(rng);
    // keep the start orthogonal to components already found
    for (Eigen::Index p = 0; p < c; ++p) v -= out.v.col(p).dot(v) * out.v.col(p);
    if (v.norm() == 0.0) continue;
    v.normalize();

    double eig = 0.0;
    for (int it = 0; it < 200000; ++it) {
      Eigen::VectorXd next = gram * v;
      for (Eigen::Index p = 0; p < c; ++p) next -= out.v.col(p).dot(next) * out.v.col(p);
      const double norm = next.norm();
      if (norm <= 1e-14 * scale) {
        eig = 0.0;
        break;
      }
      next /= norm;
      const double delta = (next - v).norm();
      v = next;
      eig = norm;
      if (delta < 1e-13) break;
    }
    eig = v.dot(gram * v);
    if (eig <= 1e-12 * scale) continue;

    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;

    const double sigma = std::sqrt(eig);
    out.sigma(c) = sigma;
    out.v.col(c) = v;
    out.u.col(c) = x * v / sigma;
    gram -= eig * v * v.transpose();
  }
  return out;
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// Memberships and weights from the top-k singular triplets of F.
inline std::pair<Memberships, FeatureWeights> init_svd(const Dataset& d, std::size_t k, double lambda,
                                                       double clamp_eps, std::uint64_t seed = 1) {
  if (k == 0) throw UsageError("number of groups must be >= 1");
  if (k > std::min(d.n_nodes(), d.n_features()))
    throw DataError("number of groups exceeds min(nodes, features)");

  const auto n = static_cast<Eigen::Index>(d.n_nodes());
  const auto l = static_cast<Eigen::Index>(d.n_features());
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::MatrixXd x = imputed_features(d);

  Memberships m{Eigen::MatrixXd::Constant(n, kk, 0.5)};
  FeatureWeights fw{Eigen::MatrixXd::Zero(l, kk + 1)};

  for (Eigen::Index c = 0; c < l; ++c) {
    double sum = 0.0;
    std::size_t seen = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto cell = d.feature(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
      if (cell == Cell::missing) continue;
      sum += cell == Cell::one ? 1.0 : 0.0;
      ++seen;
    }
    const double mean = seen ? sum / static_cast<double>(seen) : 0.5;
    fw.w(c, kk) = logit(clamp_prob(mean, clamp_eps));
  }

  if ((x.array() == x(0, 0)).all()) return {m, fw};

  const auto svd = truncated_svd(x, k, seed);
  for (Eigen::Index c = 0; c < kk; ++c) {
    for (Eigen::Index r = 0; r < l; ++r) {
      const double w = svd.sigma(c) * svd.v(r, c);
      fw.w(r, c) = std::abs(w) < lambda ? 0.0 : w;
    }
    const double lo = svd.u.col(c).minCoeff();
    const double hi = svd.u.col(c).maxCoeff();
    if (hi - lo <= 1e-12) continue;
    for (Eigen::Index i = 0; i < n; ++i)
      m.phi(i, c) = clamp_eps + (1.0 - 2.0 * clamp_eps) * (svd.u(i, c) - lo) / (hi - lo);
  }
  return {m, fw};
}

/// Per-matrix multiplier that turns an expected edge count `current` into
/// `target` when every one of the k affinity tables is scaled equally.
inline double affinity_scale_factor(double current, double target, std::size_t k) {
  return std::pow(target / current, 1.0 / static_cast<double>(k));
}

/// Sum of E[p_ij] over observed ordered pairs.
inline double expected_edge_count(const Dataset& d, const Eigen::MatrixXd& phi, const std::vector<Table2>& theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < d.n_nodes(); ++j) {
      if (!d.pair_observed(i, j)) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      double p = 1.0;
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        p *= pair_expectation(phi(ii, kk), phi(jj, kk), theta[k]);
      }
      total += p;
    }
  }
  return total;
}

inline AffinityTensor init_theta(const Dataset& d, const Memberships& m, double clamp_eps) {
  const std::size_t k = m.groups();
  AffinityTensor out;
  const double target = static_cast<double>(d.n_observed_edges());
  if (target == 0.0) {
    warn("graph has no observed edges; affinities set to 0.1");
    out.theta.assign(k, constant_table(0.1));
    return out;
  }

  std::vector<Table2> ratio(k, constant_table(0.0));
  for (std::size_t i = 0; i < d.n_nodes(); ++i) {
    for (auto j : d.out_neighbors(i)) {
      if (!d.pair_observed(i, j)) continue;
      for (std::size_t g = 0; g < k; ++g) {
        const auto gg = static_cast<Eigen::Index>(g);
        const auto wt = indicator_weights(m.phi(static_cast<Eigen::Index>(i), gg), m.phi(static_cast<Eigen::Index>(j), gg));
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) ratio[g][a][b] += wt[a][b];
      }
    }
  }
  double min_ratio = 1.0;
  for (auto& t : ratio) {
    double mx = 0.0;
    for (const auto& row : t)
      for (double v : row) mx = std::max(mx, v);
    for (auto& row : t)
      for (double& v : row) {
        v = v / mx * (1.0 - clamp_eps);
        min_ratio = std::min(min_ratio, v);
      }
  }

  const auto scaled = [&](double s) {
    std::vector<Table2> th = ratio;
    for (auto& t : th)
      for (auto& row : t)
        for (double& v : row) v = clamp_prob(s * v, clamp_eps);
    return th;
  };
  const auto rel_err = [&](double e) { return std::abs(e - target) / target; };

  const double current = expected_edge_count(d, m.phi, ratio);
  double s = affinity_scale_factor(current, target, k);
  out.theta = scaled(s);
  if (rel_err(expected_edge_count(d, m.phi, out.theta)) < 1e-3) return out;

  // clamping binds: bisection on the clamped system, which is monotone in s
  double lo = 0.0;
  double hi = std::max(s, 1.0 / std::max(min_ratio, 1e-300));
  if (expected_edge_count(d, m.phi, scaled(hi)) < target) {
    warn("target edge count unreachable within clamp range");
    out.theta = scaled(hi);
    return out;
  }
  for (int it = 0; it < 200; ++it) {
    s = 0.5 * (lo + hi);
    const double e = expected_edge_count(d, m.phi, scaled(s));
    if (rel_err(e) < 1e-3) break;
    (e < target ? lo : hi) = s;
  }
  out.theta = scaled(s);
  return out;
}

}  // namespace lmmg
