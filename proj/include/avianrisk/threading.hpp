#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "avianrisk/error.hpp"

namespace avianrisk::threading {

// Work is always split into this many shards. Shard s owns items
// s, s + kShards, s + 2*kShards, ... of any indexed range, and callers reduce
// per-shard results in shard order, so numeric output does not depend on how
// many threads actually ran.
inline constexpr int kShards = 8;

inline int worker_count() {
  int requested = 0;
  if (const char* env = std::getenv("AVIANRISK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0)
      throw InputError("AVIANRISK_THREADS must be a non-negative integer, got \"" +
                       std::string(env) + "\"");
    requested = static_cast<int>(v);
  }
  if (requested == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    requested = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return std::min(requested, kShards);
}

// Runs fn(shard) for every shard, spread over worker_count() threads. The
// first shard exception (by shard index) is rethrown after all work finishes.
inline void parallel_shards(const std::function<void(int)>& fn) {
  const int workers = worker_count();
  std::vector<std::exception_ptr> errors(kShards);
  if (workers <= 1) {
    for (int s = 0; s < kShards; ++s) {
      try {
        fn(s);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (int s = t; s < kShards; s += workers) {
          try {
            fn(s);
          } catch (...) {
            errors[s] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace avianrisk::threading
