#pragma once
// Deterministic work partitioning: [0, n) is split into one contiguous chunk
// per worker and each index is processed exactly once, so any fn that writes
// only to slot i produces identical results for every worker count.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace dgq {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

inline void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  int workers = std::min<size_t>(size_t(resolve_threads(threads)), n == 0 ? 1 : n);
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  size_t chunk = (n + size_t(workers) - 1) / size_t(workers);
  for (int w = 0; w < workers; ++w) {
    size_t lo = size_t(w) * chunk;
    size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace dgq
