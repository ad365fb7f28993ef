#pragma once

#include <cstdint>
#include <limits>

namespace potts_abc {

/// SplitMix64 generator.
///
/// The i-th output depends only on (seed, i), so `at()` gives random access
/// into the stream. Sites of one color class draw `at(site)` and can be
/// visited in any order or on any thread with identical results.
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_{seed} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += kGolden;
    return mix(state_);
  }

  /// Output number `i` of a generator freshly seeded like this one.
  constexpr result_type at(std::uint64_t i) const noexcept {
    return mix(state_ + (i + 1) * kGolden);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t state_;
};

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1).
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Hierarchical key naming one deterministic random stream.
///
/// Streams are derived as root(seed).child(domain).child(iteration)...;
/// two different paths give statistically independent streams.
class StreamKey {
public:
  constexpr StreamKey() noexcept = default;

  static constexpr StreamKey root(std::uint64_t seed) noexcept {
    return StreamKey{SplitMix64::mix(seed ^ 0x6a09e667f3bcc909ULL)};
  }

  constexpr StreamKey child(std::uint64_t tag) const noexcept {
    return StreamKey{SplitMix64::mix(value_ ^ SplitMix64::mix(tag + 0x3c6ef372fe94f82bULL))};
  }

  constexpr SplitMix64 engine() const noexcept { return SplitMix64{value_}; }
  constexpr std::uint64_t value() const noexcept { return value_; }

  friend constexpr bool operator==(StreamKey, StreamKey) = default;

private:
  constexpr explicit StreamKey(std::uint64_t v) noexcept : value_{v} {}
  std::uint64_t value_ = 0;
};

/// Top-level stream domains used by the samplers.
enum class Domain : std::uint64_t {
  labels = 1,
  theta = 2,
  beta = 3,
  auxiliary = 4,
  prior = 5,
  observations = 6,
  init = 7,
};

constexpr StreamKey child(StreamKey key, Domain d) noexcept {
  return key.child(static_cast<std::uint64_t>(d));
}

}  // namespace potts_abc
