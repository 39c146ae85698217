#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ssmstyler {

/// Execution knobs for the optional parallel paths. threads <= 1 runs inline.
struct ExecPolicy {
  unsigned threads = 1;

  static ExecPolicy hardware() { return {std::max(1u, std::thread::hardware_concurrency())}; }
};

// Calls fn(begin, end) over contiguous slices of [0, n). Slices are disjoint, so
// results are identical to the serial loop whenever fn writes only its own slice.
template <typename Fn>
void parallel_for(std::size_t n, const ExecPolicy& policy, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(policy.threads, n);
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace ssmstyler
