#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace plr::detail {

/// Worker count: PLR_THREADS if set, otherwise the hardware concurrency.
inline int default_threads() {
  if (const char* env = std::getenv("PLR_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

/// Run fn(i) for i in [0, count) across a fixed pool. Work items must be
/// independent; any exception is rethrown on the calling thread after all
/// workers join.
template <typename F>
void parallel_for(std::size_t count, F&& fn, int threads = default_threads()) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int n_workers = int(std::min<std::size_t>(std::size_t(threads), count));
  pool.reserve(std::size_t(n_workers));
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace plr::detail
