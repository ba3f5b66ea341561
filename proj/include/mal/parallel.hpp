#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mal {

/// Worker count from MAL_THREADS, falling back to `fallback` when unset or
/// unparsable. Always at least 1.
int threads_from_env(int fallback);

/// Calls fn(begin, end) on contiguous chunks of [0, n). Chunk boundaries
/// depend on `threads`, so callers must only write disjoint outputs.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mu;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Runs fn(i) for every i in [0, n) on a bounded pool that pulls items
/// one at a time.
template <typename Fn>
void parallel_items(std::size_t n, int threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  parallel_for(std::min<std::size_t>(std::max(threads, 1), n), threads, [&](std::size_t, std::size_t) {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  });
}

}  // namespace mal
