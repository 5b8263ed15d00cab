#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mmbeam {

// Run fn(chunk) for chunk = 0..n_chunks-1 across up to n_threads workers.
// Work is partitioned by chunk id, never by thread, so any reduction done by
// the caller in chunk order is independent of the thread count.
inline void parallel_chunks(int n_chunks, int n_threads,
                            const std::function<void(int)>& fn) {
  if (n_threads <= 1 || n_chunks <= 1) {
    for (int c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  int nw = std::min(n_threads, n_chunks);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(nw) - 1);
  for (int i = 1; i < nw; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (err) std::rethrow_exception(err);
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace mmbeam
