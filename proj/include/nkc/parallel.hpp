#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace nkc {

// Kahan compensated summation; used everywhere results must not depend on
// how replicates were batched across workers.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// Runs fn(i) for i in [0, count), farming fixed-size index blocks to
// `workers` threads.  The block partition does not depend on the worker
// count, so per-block outputs combined in block order are bit-identical
// for any parallelism degree.
template <class Fn>
void parallel_blocks(std::uint64_t count, unsigned workers,
                     std::uint64_t block_size, Fn&& fn) {
  if (count == 0) return;
  const std::uint64_t n_blocks = (count + block_size - 1) / block_size;
  if (workers <= 1 || n_blocks == 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
      fn(b, b * block_size, std::min(count, (b + 1) * block_size));
    }
    return;
  }
  std::atomic<std::uint64_t> next{0};
  auto run = [&] {
    for (;;) {
      std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      fn(b, b * block_size, std::min(count, (b + 1) * block_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
}

// Maps fn over [0, count) collecting results in index order.
template <class T, class Fn>
std::vector<T> parallel_map_indexed(std::uint64_t count, unsigned workers,
                                    Fn&& fn) {
  std::vector<T> results(count);
  parallel_blocks(count, workers, 1,
                  [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
                    for (std::uint64_t i = lo; i < hi; ++i) results[i] = fn(i);
                  });
  return results;
}

}  // namespace nkc
