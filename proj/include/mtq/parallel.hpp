#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mtq {

/// Runs body(r) for r in [0, reps) on a pool of worker threads and returns
/// the results ordered by r, so the output never depends on scheduling.
template <typename F>
auto run_replications(std::size_t reps, F&& body, unsigned threads = 0) {
  using Result = decltype(body(std::size_t{}));
  std::vector<Result> out(reps);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(reps, 1)));
  if (threads <= 1) {
    for (std::size_t r = 0; r < reps; ++r) out[r] = body(r);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t r = next++; r < reps; r = next++) {
        try {
          out[r] = body(r);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace mtq
