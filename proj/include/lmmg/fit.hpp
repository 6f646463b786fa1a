// Alternating block ascent: memberships, then feature weights, then affinities.
#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lmmg/gradients.hpp"
#include "lmmg/init.hpp"
#include "lmmg/model.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

struct FitReport {
  ObjectiveBreakdown initial;
  std::vector<ObjectiveBreakdown> objective_trace;  // one entry per outer iteration
  std::vector<std::size_t> nonzero_weights;
  std::size_t outer_iters_run = 0;
  bool converged = false;
  double wall_time = 0.0;
};

/// One sweep of membership updates at learning rate `rate`.
inline void phi_pass(ModelState& s, const Dataset& d, double rate) {
  const double eps = s.hyper.clamp_eps;
  const std::size_t n = d.n_nodes();
  const std::size_t k = s.groups();
  if (s.hyper.sweep == PhiSweep::gauss_seidel) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t g = 0; g < k; ++g) {
        const double step = rate * grad_phi(s, d, i, g).total;
        auto& p = s.phi()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g));
        p = clamp_prob(p + step, eps);
      }
    return;
  }
  Eigen::MatrixXd grad(s.phi().rows(), s.phi().cols());
  detail::for_each_row(n, s.hyper.threads, [&](std::size_t i) {
    for (std::size_t g = 0; g < k; ++g)
      grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = grad_phi(s, d, i, g).total;
  });
  s.phi() = (s.phi() + rate * grad).unaryExpr([eps](double p) { return clamp_prob(p, eps); });
}

/// One LASSO pass over W. `scale` shrinks the whole step (rate and
/// shrinkage together) so backtracking keeps ascending the same objective.
inline void weight_pass(ModelState& s, const Dataset& d, double scale) {
  const double gamma = s.hyper.gamma_f * scale;
  const double lambda = s.hyper.lambda * scale;
  const auto k = static_cast<Eigen::Index>(s.groups());
  Eigen::MatrixXd grad(s.w().rows(), s.w().cols());
  for (std::size_t l = 0; l < d.n_features(); ++l) grad.row(static_cast<Eigen::Index>(l)) = grad_w_row(s, d, l).transpose();
  for (Eigen::Index l = 0; l < s.w().rows(); ++l) {
    for (Eigen::Index g = 0; g < k; ++g) s.w()(l, g) = lasso_step(s.w()(l, g), grad(l, g), gamma, lambda);
    s.w()(l, k) += gamma * grad(l, k);
  }
}

/// Simultaneous gradient step on every affinity table along `grad`.
inline void theta_pass(ModelState& s, const std::vector<Table2>& grad, double rate) {
  const double eps = s.hyper.clamp_eps;
  for (std::size_t g = 0; g < s.groups(); ++g) {
    auto& t = s.theta()[g];
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) t[a][b] = clamp_prob(t[a][b] + rate * grad[g][a][b], eps);
  }
}

inline void theta_pass(ModelState& s, const Dataset& d, double rate) { theta_pass(s, grad_theta_all(s, d), rate); }

namespace detail {

constexpr int kMaxHalvings = 20;

// Applies `step(rate)`; with backtracking on, a step that lowers the
// objective is undone and retried at half the rate. After kMaxHalvings
// failed retries the block is left unchanged.
template <class Step>
void guarded_block(ModelState& s, const Dataset& d, ObjectiveBreakdown& current, double base_rate,
                   const char* block, Step&& step) {
  const ModelState before = s;
  double rate = base_rate;
  for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
    step(s, rate);
    const auto next = objective(s, d);
    if (!std::isfinite(next.total))
      throw NumericError(std::string("non-finite objective after the ") + block + " update");
    if (!s.hyper.backtrack || next.total >= current.total) {
      current = next;
      return;
    }
    s = before;
    rate *= 0.5;
  }
}

}  // namespace detail

/// Initial state: SVD memberships and weights, ratio-initialized affinities.
inline ModelState initialize(const Dataset& d, std::size_t k, const Hyperparams& hyper) {
  hyper.validate();
  if (!hyper.alpha.empty() && hyper.alpha.size() != 1 && hyper.alpha.size() != k)
    throw UsageError("alpha must have one entry or one per group");
  ModelState s;
  auto [m, fw] = init_svd(d, k, hyper.lambda, hyper.clamp_eps, hyper.seed);
  s.memberships = std::move(m);
  s.weights = std::move(fw);
  s.affinities = init_theta(d, s.memberships, hyper.clamp_eps);
  s.hyper = hyper;
  return s;
}

/// Runs the alternating updates from `s` until the relative change of the
/// total objective over one outer iteration drops below rel_tol.
inline FitReport refine(ModelState& s, const Dataset& d) {
  const auto start = std::chrono::steady_clock::now();
  validate_state(s, d);
  const auto& h = s.hyper;
  FitReport report;
  auto current = objective(s, d);
  if (!std::isfinite(current.total)) throw NumericError("non-finite objective at initialization");
  report.initial = current;

  for (std::size_t it = 0; it < h.max_outer_iters; ++it) {
    const double prev = current.total;
    for (std::size_t p = 0; p < h.inner_passes; ++p)
      detail::guarded_block(s, d, current, h.gamma_phi, "membership",
                            [&](ModelState& st, double r) { phi_pass(st, d, r); });
    for (std::size_t p = 0; p < h.inner_passes; ++p)
      detail::guarded_block(s, d, current, 1.0, "feature-weight",
                            [&](ModelState& st, double r) { weight_pass(st, d, r); });
    for (std::size_t p = 0; p < h.inner_passes; ++p) {
      const auto grad = grad_theta_all(s, d);
      detail::guarded_block(s, d, current, h.gamma_a, "affinity",
                            [&](ModelState& st, double r) { theta_pass(st, grad, r); });
    }

    report.objective_trace.push_back(current);
    report.nonzero_weights.push_back(s.weights.nonzero());
    ++report.outer_iters_run;
    const double change = std::abs(current.total - prev) / std::max(std::abs(prev), 1e-300);
    if (change < h.rel_tol) {
      report.converged = true;
      break;
    }
  }
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline std::pair<ModelState, FitReport> fit(const Dataset& d, std::size_t k, const Hyperparams& hyper) {
  auto s = initialize(d, k, hyper);
  auto report = refine(s, d);
  return {std::move(s), std::move(report)};
}

}  // namespace lmmg
