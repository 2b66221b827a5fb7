#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vlab {

/// Process-wide worker count used by ensemble loops (1 = run inline).
std::size_t worker_threads() noexcept;
void set_worker_threads(std::size_t n) noexcept;

namespace detail {
// True on threads spawned by parallel_for; nested loops then run inline.
inline thread_local bool in_worker = false;
}  // namespace detail

/// Runs fn(i) for i in [0, count) on up to worker_threads() threads using a
/// static block partition. Callers write results into slots indexed by i and
/// reduce afterwards in index order, which keeps every reduction bit-stable
/// regardless of the thread count.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t threads = detail::in_worker ? 1 : std::min(worker_threads(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t lo = count * w / threads;
    const std::size_t hi = count * (w + 1) / threads;
    pool.emplace_back([&, lo, hi] {
      detail::in_worker = true;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vlab
