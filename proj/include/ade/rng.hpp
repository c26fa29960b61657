#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "ade/matrix.hpp"

namespace ade {

// Counter-based pseudo-random stream (SplitMix64 core). Every draw is a pure
// function of (key, counter), so sequences are bit-identical across platforms
// and independent streams can be derived with split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must fit in 53 bits (always true here).
  std::int64_t uniform_index(std::int64_t n) {
    auto k = static_cast<std::int64_t>(uniform() * static_cast<double>(n));
    return k >= n ? n - 1 : k;
  }

  // Standard normal via Box-Muller; draws come in cached pairs.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // Row-major fill so the draw order is part of the format.
  Mat normal_mat(Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  Mat uniform_mat(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }

  // Rademacher +/-1 entries.
  Vec rademacher(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = (next_u64() & 1u) ? 1.0 : -1.0;
    return v;
  }

  // Derive an independent stream; the child is decoupled from this stream's
  // future draws.
  Rng split(std::uint64_t stream_id) const {
    Rng child(key_ ^ (0xA0761D6478BD642FULL * (stream_id + 1)));
    child.counter_ = 0;
    return child;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace ade
