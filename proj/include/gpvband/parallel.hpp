#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gpvband {

//! Run fn(0..n-1) on up to `threads` workers.  Tasks write into
//! preallocated index-addressed slots, so results do not depend on the
//! scheduling; the first exception thrown by any task is rethrown.
inline void parallel_for(long n,
                         int threads,
                         const std::function<void(long)>& fn)
{
  if (threads <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i)
      fn(i);
    return;
  }
  const int n_workers = static_cast<int>(
    std::min<long>(threads, n));
  std::atomic<long> next{ 0 };
  std::atomic<bool> failed{ false };
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        const long i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= n)
          return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error)
            error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& t : workers)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

inline int default_thread_count()
{
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace gpvband
