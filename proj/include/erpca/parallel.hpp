#ifndef ERPCA_PARALLEL_HPP
#define ERPCA_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "erpca/types.hpp"

namespace erpca {

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index must
// only touch state owned by that index, so results do not depend on the
// thread count. The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_for(Index n, int threads, Body&& body) {
  if (threads <= 1 || n < 2 * threads) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  const Index workers = std::min<Index>(threads, n);
  const Index chunk = (n + workers - 1) / workers;
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      const Index begin = w * chunk;
      const Index end = std::min(n, begin + chunk);
      pool.emplace_back([&, begin, end] {
        try {
          for (Index i = begin; i < end; ++i) body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace erpca

#endif  // ERPCA_PARALLEL_HPP
