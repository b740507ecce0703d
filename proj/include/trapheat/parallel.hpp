#pragma once

#include <atomic>
#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace trapheat {

// Global worker cap, set once from the CLI --threads flag.
inline int& thread_cap_ref() {
  static int cap = []() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return cap;
}

inline void set_thread_cap(int n) { thread_cap_ref() = std::max(1, n); }
inline int thread_cap() { return thread_cap_ref(); }

// Data-parallel loop over [0, n). The body must only write state owned by
// index i; results are then independent of scheduling, so runs are
// bit-identical for any thread count.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  const int workers = std::min<std::size_t>(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  constexpr std::size_t grain = 64;
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(grain);
      if (begin >= n) return;
      const std::size_t end = std::min(begin + grain, n);
      for (std::size_t i = begin; i < end; ++i) body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

}  // namespace trapheat
