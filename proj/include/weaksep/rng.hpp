#pragma once

#include <cmath>
#include <cstdint>

namespace weaksep {

/// Counter-based splitmix64 stream. Each output is a bijective mix of
/// base + counter*gamma, so substreams are cheap to derive and replicates
/// can be generated in any order. Generator identity recorded in output
/// metadata as "splitmix64".
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed) ^
               mix(stream * 0xD2B74407B1CE6E93ull + 0x632BE59BD9B4E019ull)) {}

  std::uint64_t next_u64() { return mix(state_ += kGamma); }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; one uniform pair yields two deviates.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  /// Uniform integer in [0, n), n >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Deterministic seed chaining for nested substreams.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    return mix(mix(seed) + salt * kGamma);
  }

  static constexpr const char* kIdentity = "splitmix64";

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace weaksep
