// Shared fixtures for the test binaries.
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "lmmg/lmmg.hpp"

namespace lmmg::testing {

inline ModelState make_state(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& w, std::vector<Table2> theta,
                             Hyperparams h = {}) {
  ModelState s;
  s.memberships.phi = phi;
  s.weights.w = w;
  s.affinities.theta = std::move(theta);
  s.hyper = h;
  return s;
}

struct Instance {
  Dataset data;
  ModelState state;
};

/// Random dataset plus a random interior state. Roughly 15% of cells missing.
inline Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t k, std::size_t l,
                                double missing = 0.15) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  in.data = Dataset(n, l);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && u(rng) < 0.3) in.data.add_edge(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < l; ++f)
      in.data.set_feature(i, f, u(rng) < missing ? Cell::missing : (u(rng) < 0.5 ? Cell::one : Cell::zero));

  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < phi.rows(); ++i)
    for (Eigen::Index g = 0; g < phi.cols(); ++g) phi(i, g) = 0.1 + 0.8 * u(rng);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k) + 1);
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = 2.0 * u(rng) - 1.0;
  std::vector<Table2> theta(k);
  for (auto& t : theta)
    for (auto& row : t)
      for (double& v : row) v = 0.2 + 0.7 * u(rng);
  Hyperparams h;
  h.alpha = {BetaPrior{0.5 + u(rng), 0.5 + u(rng)}};
  in.state = make_state(phi, w, theta, h);
  return in;
}

inline Table2 example_table() { return {{{0.1, 0.3}, {0.3, 0.8}}}; }

}  // namespace lmmg::testing
