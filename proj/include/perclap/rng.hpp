#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace perclap {

/// SplitMix64 generator (Steele, Lea & Flood). Small state, fully specified
/// output sequence, so streams are identical on every platform.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Exponential(1) by inverse CDF.
  double exponential() noexcept { return -std::log1p(-uniform()); }

  /// Uniform integer in [0, n). Multiply-shift; bias is below 2^-64 * n.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

/// Stafford variant 13 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based split: (master, index) -> sub-seed. Sample i of an ensemble
/// always receives the same stream regardless of which worker runs it.
constexpr std::uint64_t split_seed(std::uint64_t master,
                                   std::uint64_t index) noexcept {
  return mix64(mix64(master + 0x632be59bd9b4e019ULL) ^
               mix64(index + 0x9e3779b97f4a7c15ULL));
}

// Stream tags for the independent random inputs derived from one sample seed.
inline constexpr std::uint64_t kWalkStream = 0x5741'4c4b'0000'0001ULL;

}  // namespace perclap
