#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace lmmg::detail {

// Runs fn(row) for every row in [0, n), striping rows over `threads` workers.
// Callers write per-row results into disjoint slots and reduce them in index
// order afterwards, so the result does not depend on the thread count.
template <class Fn>
void for_each_row(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
}

}  // namespace lmmg::detail
