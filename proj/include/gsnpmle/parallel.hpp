#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gsnpmle {

/// Worker count from GSNPMLE_THREADS (unset or 0: hardware concurrency).
int worker_count();

namespace detail {
// Set inside parallel_for workers so nested loops run serially.
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Work items
/// are claimed dynamically, so body must write only to slot i of any shared
/// output. The first exception thrown by any item is rethrown after all
/// workers stop.
template <class Body>
void parallel_for(std::size_t n, Body&& body, int workers = 0) {
  if (workers <= 0) workers = worker_count();
  if (workers <= 1 || n <= 1 || detail::in_parallel_region) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    const bool outer = detail::in_parallel_region;
    detail::in_parallel_region = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        break;
      }
    }
    detail::in_parallel_region = outer;
  };
  const auto count = static_cast<std::size_t>(workers) < n ? static_cast<std::size_t>(workers) : n;
  std::vector<std::thread> pool;
  pool.reserve(count - 1);
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gsnpmle
