#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

#include "engagedyn/format.hpp"

namespace engagedyn {

/// Worker count: hardware concurrency, capped by ENGAGEDYN_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ENGAGEDYN_THREADS")) {
    if (const auto cap = parse_int(env); cap && *cap >= 1) n = std::min(n, static_cast<unsigned>(*cap));
  }
  return n;
}

/// Calls fn(i) for i in [0, n) on up to worker_count() threads. Each index is
/// processed exactly once; callers write results into slot i, so the output
/// does not depend on scheduling. The first exception (lowest index) is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace engagedyn
