#ifndef MICROSTAT_PARALLEL_HPP
#define MICROSTAT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace microstat {

// Global worker cap set once by the CLI --threads flag.
inline unsigned &max_threads() {
  static unsigned n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

// Run fn(i) for i in [0, n). Work is claimed by index from a shared
// counter, so results must be written to per-index slots; output order
// is then independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn &&fn, unsigned threads = 0) {
  if (threads == 0) threads = max_threads();
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, n > 0 ? n : 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto &th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

} // namespace microstat

#endif
