// common.hpp — error type, deterministic RNG, seed derivation, small numeric helpers.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cardlab {

/// Error with a machine-parsable code. The CLI prints "<code>: <message>"
/// and exits with `exit_code` (2 usage, 3 data, 4 training divergence).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, int exit_code = 3)
      : std::runtime_error(message), code_(std::move(code)), exit_code_(exit_code) {}

  const std::string& code() const { return code_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string code_;
  int exit_code_;
};

[[noreturn]] inline void throw_usage(const std::string& message) {
  throw Error("E_USAGE", message, 2);
}
[[noreturn]] inline void throw_data(const std::string& code, const std::string& message) {
  throw Error(code, message, 3);
}
[[noreturn]] inline void throw_diverged(const std::string& message) {
  throw Error("E_DIVERGED", message, 4);
}

namespace detail {
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Derives an independent sub-seed from (base, label, index). All randomness in
/// the project flows from one user seed through named derivations, so each
/// component is reproducible in isolation.
inline uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t index = 0) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  uint64_t state = base ^ h;
  uint64_t mixed = detail::splitmix64(state);
  state = mixed ^ (index * 0x9e3779b97f4a7c15ULL);
  return detail::splitmix64(state);
}

/// xoshiro256** with explicit uniform/normal sampling. Self-contained so that
/// sequences are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t state = seed;
    for (auto& word : state_) word = detail::splitmix64(state);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw Error("E_INTERNAL", "next_below(0)");
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform integer in [lo, hi] inclusive.
  int64_t next_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_below(static_cast<uint64_t>(hi - lo) + 1));
  }

  size_t next_index(size_t n) { return static_cast<size_t>(next_below(n)); }

  /// Normal deviate via Box-Muller (cached pair).
  double next_normal(double mean, double stddev) {
    if (has_cached_) {
      has_cached_ = false;
      return mean + stddev * cached_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[next_index(i)]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_{};
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Quantile with linear interpolation between closest ranks (values are sorted
/// in place by the caller or pre-sorted).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error("E_DATA", "quantile of empty set");
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

inline double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Population variance (divide by N).
inline double population_variance(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mu = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return acc / static_cast<double>(values.size());
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("E_IO", "cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("E_IO", "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("E_IO", "failed writing '" + path + "'");
}

/// Runs fn(i) for i in [0, n). Results must not depend on scheduling; callers
/// write into pre-sized slots indexed by i.
inline void parallel_for(size_t jobs, size_t n, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::atomic<size_t> next{0};
  const size_t worker_count = std::min(jobs, n);
  workers.reserve(worker_count);
  for (size_t w = 0; w < worker_count; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace cardlab
