#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "lmmg/types.hpp"

namespace lmmg {

struct Metrics {
  std::optional<double> auc;  // absent without both classes
  double loglik = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

/// Rank-statistic AUC (ties count one half), clamped log-likelihood and
/// accuracy at threshold 0.5 for (probability, truth) pairs.
inline Metrics evaluate(const std::vector<std::pair<double, bool>>& scores) {
  if (scores.empty()) throw DataError("no scores to evaluate");
  Metrics m;
  m.count = scores.size();
  std::size_t correct = 0;
  for (const auto& [p, y] : scores) {
    const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
    m.loglik += y ? std::log(q) : std::log1p(-q);
    correct += ((p >= 0.5) == y) ? 1 : 0;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.count);

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a].first < scores[b].first; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]].first == scores[order[i]].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (scores[order[t]].second) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos > 0 && n_neg > 0) {
    const double np = static_cast<double>(n_pos);
    m.auc = (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
  }
  return m;
}

}  // namespace lmmg
