#pragma once

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>
#include <functional>

namespace quadboost {

// ---- Errors ----
//
// Every contract violation surfaces as one of these so callers (and the CLI)
// can map failures to distinct outcomes. OomGuardError is intentionally not a
// DataError: running into the memory cap is an operational condition, not a
// malformed input.

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

struct DataError : Error {
  explicit DataError(const std::string& msg) : Error("data: " + msg) {}
};

struct OomGuardError : Error {
  explicit OomGuardError(const std::string& msg) : Error("oom guard: " + msg) {}
};

// ---- Integer helpers ----

// Bytes needed to encode ids 0..n_values-1. A single-value domain needs no
// bytes at all; decoders materialize id 0.
inline int byte_width(std::uint64_t n_values) {
  if (n_values <= 1) return 0;
  const int bits = std::bit_width(n_values - 1);
  return (bits + 7) / 8;
}

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

// Multiplies byte quantities that can reach hundreds of GB; traps on u64
// overflow instead of wrapping.
inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > UINT64_MAX / a) throw Error("byte arithmetic overflow");
  return a * b;
}

// ---- Intra-worker parallelism ----

// QUADBOOST_THREADS caps how many threads a single simulated worker may use
// for histogram construction. Default is 1: results are identical at any
// setting (threads own disjoint feature ranges), only wall time changes.
inline int thread_cap() {
  const char* env = std::getenv("QUADBOOST_THREADS");
  if (!env) return 1;
  const long v = std::strtol(env, nullptr, 10);
  if (v <= 1) return 1;
  const long hw = static_cast<long>(std::thread::hardware_concurrency());
  return static_cast<int>(hw > 0 && v > hw ? hw : v);
}

// Runs fn(chunk_begin, chunk_end) over [0, count) split into contiguous
// chunks, one per thread. Each chunk must touch disjoint state.
inline void parallel_chunks(std::size_t count, int threads,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 1 || count < 2) {
    fn(0, count);
    return;
  }
  const std::size_t n = static_cast<std::size_t>(threads) < count
                            ? static_cast<std::size_t>(threads)
                            : count;
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = count * t / n;
    const std::size_t hi = count * (t + 1) / n;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace quadboost
