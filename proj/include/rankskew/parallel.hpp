#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rankskew {

/// Worker cap used by the Monte Carlo engines. 0 means hardware concurrency.
/// Results never depend on this value.
inline std::atomic<unsigned> g_max_threads{0};

inline unsigned worker_count(std::size_t jobs) {
  unsigned cap = g_max_threads.load();
  if (cap == 0) cap = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(cap, std::max<std::size_t>(jobs, 1)));
}

/// Runs fn(i) for i in [0, jobs) on up to worker_count threads. Each job must
/// write only to its own output slot. The first exception (lowest job index)
/// is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
  const unsigned workers = worker_count(jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_index = jobs;
  std::exception_ptr err;
  auto body = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (err) std::rethrow_exception(err);
}

}  // namespace rankskew
