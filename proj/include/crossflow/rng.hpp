#pragma once

#include <cstdint>
#include <string_view>

namespace crossflow {

/// Counter-based random stream.
///
/// Draw k of a stream with seed s is a pure function of (s, k), so a stream
/// can be reproduced on any platform from its seed and counter alone.
/// Independent substreams are derived with `split`, which lets subsystems
/// (arrivals, exploration, batch sampling) consume randomness without
/// perturbing each other.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Exponential variate with the given mean.
  double exponential(double mean);
  bool bernoulli(double p) { return uniform() < p; }

  /// Child stream keyed by `tag`; does not advance this stream.
  RngStream split(std::uint64_t tag) const;
  RngStream split(std::string_view tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace crossflow
