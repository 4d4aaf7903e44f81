#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace sgdperf {

/// Finalizer of SplitMix64 (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the i-th output (i = 1, 2, ...) of a stream with
/// key k is mix64(k + i * 0x9E3779B97F4A7C15). This is SplitMix64 read as a
/// counter mode, so any output can be recomputed from (key, index) alone.
///
/// Streams are keyed by (seed, stream id) through `derive_key`; a run uses
/// stream 0 for its initial point, 1 for gradient noise and 2 for mini-batch
/// index sampling.
///
/// Uniforms take the top 53 bits: u = (x >> 11) * 2^-53 in [0, 1).
/// Normals use the Box-Muller transform on (1 - u1, u2); the sine half of each
/// pair is cached and returned by the next call.
///
/// Satisfies UniformRandomBitGenerator, but the library never routes it
/// through <random> distributions since their algorithms are unspecified.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  }

  static constexpr CounterRng stream(std::uint64_t seed, std::uint64_t stream_id) noexcept {
    return CounterRng(derive_key(seed, stream_id));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) by rejection on the top bits; n > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return x % n;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sgdperf
