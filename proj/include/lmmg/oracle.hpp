// Brute-force references for tiny instances: the exact network
// log-likelihood by enumerating every indicator assignment, and the exact
// (untruncated) variational bound.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "lmmg/model.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

constexpr std::size_t kMaxEnumerationBits = 16;

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

inline PairList observed_pairs(const Dataset& d) {
  PairList out;
  for (std::size_t i = 0; i < d.n_nodes(); ++i)
    for (std::size_t j = 0; j < d.n_nodes(); ++j)
      if (d.pair_observed(i, j)) out.emplace_back(i, j);
  return out;
}

/// log sum_Z P(A | Z, Theta) P(Z | phi) over the given ordered pairs, with
/// the exact log(1 - p) for non-edges.
inline double oracle_exact_loglik(const ModelState& s, const Dataset& d, const PairList& pairs) {
  const std::size_t n = d.n_nodes();
  const std::size_t k = s.groups();
  if (n * k > kMaxEnumerationBits) throw DataError("instance too large to enumerate (N*K > 16)");
  const std::size_t bits = n * k;
  const std::uint64_t count = std::uint64_t{1} << bits;

  std::vector<double> terms;
  terms.reserve(count);
  for (std::uint64_t zmask = 0; zmask < count; ++zmask) {
    const auto z = [&](std::size_t i, std::size_t g) { return static_cast<int>((zmask >> (i * k + g)) & 1U); };
    double lp = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t g = 0; g < k; ++g) {
        const double p = s.phi()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g));
        lp += z(i, g) ? std::log(p) : std::log1p(-p);
      }
    for (const auto& [i, j] : pairs) {
      double p = 1.0;
      for (std::size_t g = 0; g < k; ++g) p *= s.theta()[g][z(i, g)][z(j, g)];
      lp += d.edge(i, j) ? std::log(p) : std::log1p(-p);
    }
    terms.push_back(lp);
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc);
}

inline double oracle_exact_loglik(const ModelState& s, const Dataset& d) {
  return oracle_exact_loglik(s, d, observed_pairs(d));
}

/// E[log(1 - p_ij)] by enumerating the 4^K indicator outcomes of the pair.
inline double exact_nonedge_expectation(const ModelState& s, std::size_t i, std::size_t j) {
  const std::size_t k = s.groups();
  if (2 * k > 20) throw DataError("too many groups to enumerate a pair");
  const std::uint64_t count = std::uint64_t{1} << (2 * k);
  double acc = 0.0;
  for (std::uint64_t m = 0; m < count; ++m) {
    double prob = 1.0;
    double p = 1.0;
    for (std::size_t g = 0; g < k; ++g) {
      const int zi = static_cast<int>((m >> (2 * g)) & 1U);
      const int zj = static_cast<int>((m >> (2 * g + 1)) & 1U);
      const double pi = s.phi()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g));
      const double pj = s.phi()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(g));
      prob *= (zi ? pi : 1.0 - pi) * (zj ? pj : 1.0 - pj);
      p *= s.theta()[g][zi][zj];
    }
    acc += prob * std::log1p(-p);
  }
  return acc;
}

/// E_Z[log P(A | Z)] without the second-order expansion.
inline double exact_jensen_bound(const ModelState& s, const Dataset& d, const PairList& pairs) {
  double acc = 0.0;
  for (const auto& [i, j] : pairs) {
    if (d.edge(i, j)) {
      for (std::size_t g = 0; g < s.groups(); ++g) {
        const auto gg = static_cast<Eigen::Index>(g);
        acc += pair_expectation(s.phi()(static_cast<Eigen::Index>(i), gg), s.phi()(static_cast<Eigen::Index>(j), gg),
                                log_table(s.theta()[g]));
      }
    } else {
      acc += exact_nonedge_expectation(s, i, j);
    }
  }
  return acc;
}

inline double exact_jensen_bound(const ModelState& s, const Dataset& d) {
  return exact_jensen_bound(s, d, observed_pairs(d));
}

}  // namespace lmmg
