#pragma once

#include <cstdint>
#include <limits>

namespace lsgd {

/// SplitMix64 finalizer; a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine64(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ mix64(v));
}

/// Counter-mode generator: the n-th output is mix64(key + n * gamma).
/// Satisfies UniformRandomBitGenerator.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  explicit CounterEngine(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return mix64(key_ + 0xd1b54a32d192ed03ULL * ++counter_);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Independent sub-streams drawn from one RngStream position.
enum class RngPurpose : std::uint64_t {
  batch = 1,
  noise = 2,
  partition = 3,
  init = 4,
  trial = 5,
  data = 6,
};

/// Addresses the randomness used by one client at one local iteration.
/// The engine it produces is a pure function of (seed, client, round,
/// counter, purpose); evaluation order never matters.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t client = 0;
  std::uint64_t round = 0;
  std::uint64_t counter = 0;

  CounterEngine engine(RngPurpose purpose) const noexcept {
    std::uint64_t h = mix64(seed);
    h = combine64(h, static_cast<std::uint64_t>(purpose));
    h = combine64(h, client);
    h = combine64(h, round);
    h = combine64(h, counter);
    return CounterEngine(h);
  }

  RngStream at(std::uint64_t iteration) const noexcept {
    RngStream s = *this;
    s.counter = iteration;
    return s;
  }

  bool operator==(const RngStream&) const = default;
};

/// A seed for the `index`-th independent replicate of an experiment.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return combine64(mix64(seed) ^ 0x5851f42d4c957f2dULL, index);
}

}  // namespace lsgd
