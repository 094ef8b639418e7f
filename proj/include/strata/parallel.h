#ifndef STRATA_PARALLEL_H_
#define STRATA_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace strata {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Indices are handed
// out dynamically, so fn must write its result to a slot owned by i. The
// first exception thrown by any fn is rethrown after all threads join.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  const size_t threads = std::min(n, static_cast<size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace strata

#endif  // STRATA_PARALLEL_H_
