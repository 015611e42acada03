#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace blapose {

// Seeded random stream. Every generator in the library takes one of these
// (or anything with the same uniform/normal surface) explicitly; there is no
// global state, so concurrent callers need one stream each.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal(double mean, double sd) {
    if (sd == 0.0) return mean;
    return std::normal_distribution<double>(mean, sd)(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Index in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  Eigen::Vector3d normal3(double sd) { return {normal(0, sd), normal(0, sd), normal(0, sd)}; }

  // Derive an independent child stream, e.g. one per worker or per sequence.
  Rng split() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace blapose
