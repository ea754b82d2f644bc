#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace altphillips {

// Worker count from ALTPHILLIPS_THREADS (default 1). Work is split into
// fixed blocks independent of this number, so results never depend on it.
inline unsigned thread_count() {
  if (const char* env = std::getenv("ALTPHILLIPS_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(std::min<long>(n, 256));
  }
  return 1;
}

// Runs body(i) for i in [0, n); each index is written by exactly one worker.
template <class Body>
void parallel_for(std::size_t n, Body body) {
  const unsigned t = std::min<std::size_t>(thread_count(), n == 0 ? 1 : n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < t; ++k)
    pool.emplace_back([&, k] {
      for (std::size_t i = k; i < n; i += t) body(i);
    });
  for (auto& th : pool) th.join();
}

// Sum of term(i) over [0, n): partial sums over fixed 256-index blocks are
// added in block order.
template <class Term>
double parallel_sum(std::size_t n, Term term) {
  constexpr std::size_t block = 256;
  const std::size_t nb = (n + block - 1) / block;
  std::vector<double> partial(nb, 0.0);
  parallel_for(nb, [&](std::size_t b) {
    double acc = 0.0;
    const std::size_t hi = std::min(n, (b + 1) * block);
    for (std::size_t i = b * block; i < hi; ++i) acc += term(i);
    partial[b] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace altphillips
