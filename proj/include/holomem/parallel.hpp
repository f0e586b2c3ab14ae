#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace holomem {

// Work is always cut into blocks of this many sites, independent of the
// thread count, so reductions that combine per-block partials in block
// order give the same bits on any number of threads.
inline constexpr std::size_t kBlockSize = 4096;

inline std::size_t block_count(std::size_t n) {
  return (n + kBlockSize - 1) / kBlockSize;
}

/// Calls fn(begin, end, block) for every block of [0, n). Blocks are
/// dealt round-robin to `threads` workers.
template <typename Fn>
void for_each_block(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t blocks = block_count(n);
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t b = first; b < blocks; b += stride) {
      const std::size_t begin = b * kBlockSize;
      fn(begin, std::min(n, begin + kBlockSize), b);
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), blocks);
  if (workers <= 1) {
    run(0, 1);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          run(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    try {
      run(0, workers);
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace holomem
