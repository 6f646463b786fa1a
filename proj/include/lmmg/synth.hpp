// Sampling datasets from the generative model, with planted presets.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lmmg/log.hpp"
#include "lmmg/model.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

struct SynthParams {
  std::size_t n = 0;
  std::size_t l = 0;
  std::size_t k = 0;
  std::vector<BetaPrior> alpha;  // one per group
  std::vector<Table2> theta;
  Eigen::MatrixXd w;             // L x (K+1)
  bool features_from_z = false;  // logistic input is the sampled indicator row instead of phi
  bool homophily = false;        // enables the dense-regime warning
};

struct SynthResult {
  Dataset data;
  Eigen::MatrixXd phi;                 // sampled memberships
  std::vector<std::uint8_t> z;         // N x K indicators, row-major
  SynthParams params;

  bool indicator(std::size_t i, std::size_t k) const { return z[i * params.k + k] != 0; }
};

namespace detail {

// Scales `shape` so that E[p] over independent fair indicators equals
// `density`, capping the largest entry at 0.95.
inline Table2 scaled_shape(const Table2& shape, double density, std::size_t k) {
  const double mean = 0.25 * (shape[0][0] + shape[0][1] + shape[1][0] + shape[1][1]);
  double mx = 0.0;
  for (const auto& r : shape)
    for (double v : r) mx = std::max(mx, v);
  const double c = std::min(std::pow(density, 1.0 / static_cast<double>(k)) / mean, 0.95 / mx);
  Table2 t = shape;
  for (auto& r : t)
    for (double& v : r) v *= c;
  return t;
}

}  // namespace detail

/// Planted parameters. "homophily": diagonal-dominant affinities (same
/// indicator links 10x more often) with sharply bimodal Beta(0.2, 0.2)
/// memberships. "core-periphery": indicator 1 is the core; core-core >
/// core-periphery > periphery-periphery, Beta(0.5, 0.5) memberships. Every
/// feature gets one planted group.
inline SynthParams synth_preset(const std::string& name, std::size_t n, std::size_t l, std::size_t k) {
  if (k == 0) throw UsageError("preset needs k >= 1");
  SynthParams p;
  p.n = n;
  p.l = l;
  p.k = k;
  p.alpha.assign(k, BetaPrior{0.5, 0.5});
  Table2 shape;
  if (name == "homophily") {
    shape = {{{1.0, 0.1}, {0.1, 1.0}}};
    p.alpha.assign(k, BetaPrior{0.2, 0.2});
    p.homophily = true;
  } else if (name == "core-periphery") {
    shape = {{{0.15, 0.5}, {0.5, 1.0}}};
  } else {
    throw UsageError("unknown preset '" + name + "'");
  }
  p.theta.assign(k, detail::scaled_shape(shape, 0.1, k));
  const auto kk = static_cast<Eigen::Index>(k);
  p.w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l), kk + 1);
  for (Eigen::Index f = 0; f < p.w.rows(); ++f) {
    p.w(f, f % kk) = 6.0;
    p.w(f, kk) = -3.0;
  }
  return p;
}

/// Planted parameters taken from an existing model; memberships are still
/// resampled from the Beta priors.
inline SynthParams synth_params_from(const ModelState& s, std::size_t n) {
  SynthParams p;
  p.n = n;
  p.l = s.n_features();
  p.k = s.groups();
  for (std::size_t k = 0; k < p.k; ++k) p.alpha.push_back(s.hyper.prior(k));
  p.theta = s.theta();
  p.w = s.w();
  return p;
}

/// Draws phi ~ Beta(alpha), z ~ Bernoulli(phi), F ~ Bernoulli(y) and
/// A_ij ~ Bernoulli(prod_k Theta_k[z_ik][z_jk]) for every ordered pair, in
/// that order, from one seeded engine.
inline SynthResult synth_generate(const SynthParams& p, std::uint64_t seed) {
  if (p.n == 0) throw UsageError("n must be >= 1");
  if (p.k == 0 || p.theta.size() != p.k || p.alpha.size() != p.k) throw UsageError("planted parameters have wrong group count");
  if (static_cast<std::size_t>(p.w.rows()) != p.l || static_cast<std::size_t>(p.w.cols()) != p.k + 1)
    throw UsageError("planted weights have wrong shape");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto beta = [&](BetaPrior a) {
    std::gamma_distribution<double> ga(a.a, 1.0), gb(a.b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
  };

  SynthResult out;
  out.params = p;
  out.data = Dataset(p.n, p.l);
  for (std::size_t i = 0; i < p.n; ++i) out.data.node_ids[i] = "n" + std::to_string(i);
  out.phi.resize(static_cast<Eigen::Index>(p.n), static_cast<Eigen::Index>(p.k));
  out.z.assign(p.n * p.k, 0);

  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t k = 0; k < p.k; ++k) out.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = beta(p.alpha[k]);
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t k = 0; k < p.k; ++k)
      out.z[i * p.k + k] = unif(rng) < out.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) ? 1 : 0;

  const auto kk = static_cast<Eigen::Index>(p.k);
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t l = 0; l < p.l; ++l) {
      const auto ll = static_cast<Eigen::Index>(l);
      double x = p.w(ll, kk);
      for (std::size_t k = 0; k < p.k; ++k) {
        const double in = p.features_from_z ? static_cast<double>(out.z[i * p.k + k])
                                            : out.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        x += p.w(ll, static_cast<Eigen::Index>(k)) * in;
      }
      out.data.set_feature(i, l, unif(rng) < sigmoid(x) ? Cell::one : Cell::zero);
    }
  }

  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.n; ++j) {
      if (i == j) continue;
      double prob = 1.0;
      for (std::size_t k = 0; k < p.k; ++k) prob *= p.theta[k][out.z[i * p.k + k]][out.z[j * p.k + k]];
      if (unif(rng) < prob) out.data.add_edge(i, j);
    }

  const double pairs = static_cast<double>(p.n) * static_cast<double>(p.n - 1);
  if (p.homophily && static_cast<double>(out.data.n_edges()) > 0.5 * pairs)
    warn("sampled graph is dense: more than half of all ordered pairs are edges");
  return out;
}

}  // namespace lmmg
