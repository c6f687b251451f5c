#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace starcool {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work is split by
// index, so each i is processed exactly once and callers that write results
// into slot i get output independent of the thread count. Aggregation stays
// with the caller and must be done serially over slot order.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  if (count == 0) return;
  int n_workers = std::max(1, threads);
  n_workers = static_cast<int>(std::min<std::size_t>(n_workers, count));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = static_cast<std::size_t>(w); i < count;
             i += static_cast<std::size_t>(n_workers)) {
          fn(i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace starcool
