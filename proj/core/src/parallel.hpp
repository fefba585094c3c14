#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lsgd::detail {

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls body(i) for i in [0, n). Each index is handled by exactly one thread;
// the first exception thrown (by lowest index) is rethrown after joining.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::mutex mu;
  std::exception_ptr error;
  std::size_t error_index = n;
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += threads) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (i < error_index) {
              error_index = i;
              error = std::current_exception();
            }
            return;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace lsgd::detail
