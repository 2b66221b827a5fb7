#include "vlab/parallel.hpp"

#include <atomic>

namespace vlab {

namespace {
std::atomic<std::size_t> g_workers{1};
}

std::size_t worker_threads() noexcept { return g_workers.load(std::memory_order_relaxed); }

void set_worker_threads(std::size_t n) noexcept {
  if (n == 0) {
    n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
  }
  g_workers.store(n, std::memory_order_relaxed);
}

}  // namespace vlab
