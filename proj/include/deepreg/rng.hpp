#pragma once

#include <cstdint>

namespace deepreg {

/// SplitMix64 stream (Steele, Lea & Flood 2014). State advances by the golden
/// gamma 0x9E3779B97F4A7C15; each output is the standard 64-bit finalizer of
/// the new state. Chosen because it is a few lines in any language, so noise
/// matrices and initial weights can be replayed bit-for-bit elsewhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  /// Uniform on [0, 1) with 53 random bits: (next() >> 11) * 2^-53.
  double uniform();

  /// Uniform on [lo, hi): lo + (hi - lo) * uniform().
  double uniform(double lo, double hi);

  /// Standard normal by Box-Muller using two consecutive uniforms
  /// u1 = 1 - uniform() (never zero) and u2 = uniform(); only the cosine
  /// branch is used so every call consumes exactly two outputs.
  double normal();

 private:
  std::uint64_t state_;
};

}  // namespace deepreg
