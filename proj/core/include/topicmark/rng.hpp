#pragma once

#include <cstdint>

namespace topicmark {

namespace detail {
__extension__ using uint128 = unsigned __int128;
}  // namespace detail

/// Counter-based generator: draw i of stream `seed` is a pure function of
/// (seed, i), so any implementation of the same mixing reproduces sequences.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  static std::uint64_t bits_at(std::uint64_t seed, std::uint64_t index) noexcept {
    // SplitMix64 finalizer over a Weyl sequence offset by the seed.
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1) with 53 random bits.
  static double uniform_at(std::uint64_t seed, std::uint64_t index) noexcept {
    return static_cast<double>(bits_at(seed, index) >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_u64() noexcept { return bits_at(seed_, counter_++); }
  double uniform() noexcept { return uniform_at(seed_, counter_++); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; the bias is at most n / 2^64.
    return static_cast<std::uint64_t>((static_cast<detail::uint128>(next_u64()) * n) >> 64);
  }
  /// Standard normal via Box-Muller (consumes two draws).
  double normal() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// Derives an independent stream seed from a parent seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
  return CounterRng::bits_at(parent ^ 0xA0761D6478BD642FULL, tag);
}

}  // namespace topicmark
