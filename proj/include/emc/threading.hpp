#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace emc {

namespace detail {
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> count{1};
  return count;
}
}  // namespace detail

/** Number of worker threads parallel_for may use (default 1). */
inline int max_threads() { return detail::thread_count_slot().load(std::memory_order_relaxed); }

inline void set_max_threads(int n) {
  detail::thread_count_slot().store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

/**
 * Runs fn(begin, end) over a partition of [0, n). Results must not depend on
 * the partition; every consumer writes to disjoint per-index slots and draws
 * randomness from counter-based streams keyed by index.
 */
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  if (n == 0) return;
  std::size_t workers = static_cast<std::size_t>(max_threads());
  workers = std::min(workers, n);
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&](std::size_t lo, std::size_t hi) {
    try {
      fn(lo, hi);
    } catch (...) {
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };
  for (std::size_t w = 1; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back(run, lo, hi);
  }
  run(0, std::min(chunk, n));
  for (auto& t : threads) t.join();
  if (failed.load()) std::rethrow_exception(error);
}

}  // namespace emc
