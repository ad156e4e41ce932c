#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <utility>
#include <vector>

namespace overlap_reg {

namespace detail {
inline std::atomic<int>& thread_budget() {
  static std::atomic<int> n{0};  // 0 = hardware concurrency
  return n;
}
}  // namespace detail

// Global worker budget for the per-point parallel loops. 0 restores the
// hardware default; 1 forces sequential execution everywhere.
inline void set_thread_count(int n) { detail::thread_budget().store(n < 0 ? 0 : n); }

inline int thread_count() {
  const int n = detail::thread_budget().load();
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for every i in [0, n). Each worker owns a contiguous index
// range and may only write state addressed by its own i, so the result is
// identical for any worker count. min_parallel is the job size below which
// spawning threads is not worth it.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_parallel = 4096) {
  const int workers = thread_count();
  if (workers <= 1 || n < min_parallel || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t per = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * per;
    if (begin >= n) break;
    const std::size_t end = std::min(n, begin + per);
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Deterministic reduction: the chunk grid depends only on n (never on the
// worker count) and partials are combined in chunk order, so the result is
// bit-identical across thread counts.
template <typename Acc, typename ChunkFn, typename CombineFn>
Acc parallel_reduce(std::size_t n, Acc init, ChunkFn&& chunk_fn, CombineFn&& combine) {
  constexpr std::size_t kChunk = 16384;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  if (chunks <= 1 || thread_count() <= 1) {
    Acc acc = std::move(init);
    if (n > 0) acc = combine(std::move(acc), chunk_fn(std::size_t{0}, n));
    return acc;
  }
  std::vector<Acc> partial(chunks, init);
  parallel_for(
      chunks,
      [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        partial[c] = chunk_fn(begin, end);
      },
      /*min_parallel=*/2);
  Acc acc = std::move(init);
  for (std::size_t c = 0; c < chunks; ++c) acc = combine(std::move(acc), std::move(partial[c]));
  return acc;
}

}  // namespace overlap_reg
