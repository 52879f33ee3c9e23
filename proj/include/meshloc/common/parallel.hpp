#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace meshloc {

/// Worker-thread cap: MESHLOC_THREADS if set (>=1), else hardware concurrency.
inline int worker_thread_count() {
  if (const char* env = std::getenv("MESHLOC_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n) on up to worker_thread_count() threads.
/// fn must only touch state owned by index i (results are index-addressed,
/// so the output is identical to the sequential order).
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
  if (n <= 0) return;
  const int threads = std::min<long>(worker_thread_count(), n);
  if (threads <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace meshloc
