// Choosing the number of groups by repeated random validation nodes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "lmmg/fit.hpp"
#include "lmmg/parallel.hpp"
#include "lmmg/predict.hpp"
#include "lmmg/types.hpp"

namespace lmmg {

enum class CvTask { features, links };

struct KSelectionReport {
  std::vector<std::size_t> candidates;
  std::vector<double> mean_loglik;
  std::vector<double> std_loglik;
  std::vector<std::vector<double>> rep_loglik;  // [candidate][rep]
  std::vector<std::size_t> validation_nodes;     // shared across candidates
  std::size_t chosen_k = 0;
  std::size_t reps = 0;
};

/// ceil(log2 n) - 2 .. ceil(log2 n) + 2, clipped to [1, min(n, l)].
inline std::vector<std::size_t> default_k_candidates(std::size_t n, std::size_t l) {
  std::size_t center = 0;
  while ((std::size_t{1} << center) < n) ++center;
  std::vector<std::size_t> out;
  const std::size_t hi = std::min(n, l);
  for (long k = static_cast<long>(center) - 2; k <= static_cast<long>(center) + 2; ++k)
    if (k >= 1 && static_cast<std::size_t>(k) <= hi) out.push_back(static_cast<std::size_t>(k));
  return out;
}

/// splitmix64; derives independent per-repetition seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Held-out log-likelihood of one validation node for a given K.
inline double validation_loglik(const Dataset& data, std::size_t node, std::size_t k, const Hyperparams& hyper,
                                CvTask task) {
  Dataset d = data;
  if (task == CvTask::features) {
    std::vector<Cell> truth(d.n_features());
    for (std::size_t l = 0; l < d.n_features(); ++l) {
      truth[l] = d.feature(node, l);
      d.set_feature(node, l, Cell::missing);
    }
    const auto [model, report] = fit(d, k, hyper);
    return predict_missing_features(model, d, node, truth).loglik.value_or(0.0);
  }
  d.hide_links(node);
  const auto [model, report] = fit(d, k, hyper);
  return predict_links(model, d, node).loglik.value_or(0.0);
}

/// Picks K maximizing the mean held-out log-likelihood over `reps` random
/// validation nodes (the same nodes for every candidate). Ties go to the
/// smaller K. Repetitions run on `hyper.threads` workers; each fit itself is
/// single-threaded, so the report does not depend on the thread count.
inline KSelectionReport select_k(const Dataset& data, const Hyperparams& hyper, std::vector<std::size_t> candidates = {},
                                 std::size_t reps = 20, CvTask task = CvTask::features) {
  if (data.n_nodes() < 3) throw DataError("K selection needs at least 3 nodes");
  if (reps == 0) throw UsageError("reps must be >= 1");
  if (candidates.empty()) candidates = default_k_candidates(data.n_nodes(), data.n_features());
  std::erase_if(candidates, [&](std::size_t k) { return k < 1 || k > std::min(data.n_nodes(), data.n_features()); });
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.empty()) throw DataError("no admissible K candidate");

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < data.n_nodes(); ++i) {
    if (task == CvTask::features ? data.n_observed(i) > 0 : !data.links_hidden(i)) eligible.push_back(i);
  }
  if (eligible.empty()) throw DataError("no node is eligible for validation");

  KSelectionReport rep;
  rep.candidates = candidates;
  rep.reps = reps;
  for (std::size_t r = 0; r < reps; ++r) {
    std::mt19937_64 rng(derive_seed(hyper.seed, r));
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    rep.validation_nodes.push_back(eligible[pick(rng)]);
  }

  Hyperparams inner = hyper;
  inner.threads = 1;
  const std::size_t jobs = candidates.size() * reps;
  std::vector<double> ll(jobs, 0.0);
  detail::for_each_row(jobs, hyper.threads, [&](std::size_t job) {
    const std::size_t c = job / reps;
    const std::size_t r = job % reps;
    ll[job] = validation_loglik(data, rep.validation_nodes[r], candidates[c], inner, task);
  });

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::vector<double> row(ll.begin() + static_cast<long>(c * reps), ll.begin() + static_cast<long>((c + 1) * reps));
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    rep.mean_loglik.push_back(mean);
    rep.std_loglik.push_back(reps > 1 ? std::sqrt(var / static_cast<double>(reps - 1)) : 0.0);
    rep.rep_loglik.push_back(std::move(row));
    if (mean > best) {
      best = mean;
      rep.chosen_k = candidates[c];
    }
  }
  return rep;
}

}  // namespace lmmg
