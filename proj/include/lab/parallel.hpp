#pragma once
#include <atomic>
#include <thread>
#include <vector>

namespace lab {

// Runs body(i) for i in [0, n) across the given number of worker threads.
// Callers write results into per-index slots and reduce afterwards in index
// order, so the outcome is identical for any worker count.
template <class F>
void parallel_for(int n, int workers, F&& body) {
  if (workers <= 0) workers = int(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto run = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

}  // namespace lab
