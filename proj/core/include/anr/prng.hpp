#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace anr {

/// xoshiro256** generator seeded through SplitMix64.
///
/// Gaussian draws use the polar Box-Muller method and cache the spare value,
/// so a stream of normal() calls consumes uniform pairs deterministically.
class Prng {
 public:
  using result_type = std::uint64_t;

  explicit Prng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Child stream that depends only on this generator's seed and `stream`,
  /// not on how many values were drawn so far.
  [[nodiscard]] Prng split(std::uint64_t stream) const;
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace anr
