#pragma once
// Deterministic parallel map over trial indices.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace skewmeet {

/// 0 means "one worker per hardware thread".
inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/**
 * Evaluates fn(i) for i in [0, count) on up to `threads` workers and returns
 * the results in index order. Work is handed out in small chunks through an
 * atomic cursor; since every result lands in its own slot, the output does
 * not depend on the schedule. The first exception thrown by fn is rethrown.
 */
template <class Fn>
auto parallel_map(std::uint64_t count, unsigned threads, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, std::uint64_t>> {
  using Result = std::invoke_result_t<Fn&, std::uint64_t>;
  std::vector<Result> out(count);
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads),
                                                    std::max<std::uint64_t>(count, 1)));
  constexpr std::uint64_t kChunk = 16;
  std::atomic<std::uint64_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::uint64_t begin = cursor.fetch_add(kChunk);
      if (begin >= count) return;
      const std::uint64_t end = std::min(count, begin + kChunk);
      try {
        for (std::uint64_t i = begin; i < end; ++i) out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        cursor.store(count);
        return;
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace skewmeet
