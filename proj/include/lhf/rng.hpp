#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>

namespace lhf {

/// SplitMix64 finalizer. Bijective on 64-bit words.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream key from a base seed and a tuple of tags,
/// e.g. derive_seed(plan_seed, {env_index, history_index}).
///
///   h0 = mix64(base)
///   h_{k+1} = mix64(h_k ^ mix64(tag_k + 0x9e3779b97f4a7c15))
///
/// Tag order matters, so (i, l) and (l, i) give different streams.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base,
                                                  std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(base);
  for (const auto tag : tags) h = mix64(h ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
  return h;
}

/// Counter-based generator: the n-th output is mix64(key + n * golden), so a
/// stream is fully described by (key, counter) and never shares state.
/// Satisfies UniformRandomBitGenerator, but the helpers below are used
/// instead of <random> distributions, whose output is implementation-defined.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform on (0, 1] with 53-bit resolution. Never returns 0, so an
  /// acceptance test `v <= p` with p == 0 can never pass.
  double uniform_open_closed() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Rejection on the top of the range keeps every residue equally likely.
    const std::uint64_t limit = max() - (max() % n + 1) % n;
    std::uint64_t x = (*this)();
    while (x > limit) x = (*this)();
    return x % n;
  }

  bool bernoulli(double p) noexcept { return uniform_open_closed() <= p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle driven by CounterRng::below.
template <typename T>
void shuffle(std::span<T> items, CounterRng& rng) {
  for (std::size_t k = items.size(); k > 1; --k) {
    const auto j = static_cast<std::size_t>(rng.below(k));
    std::swap(items[k - 1], items[j]);
  }
}

}  // namespace lhf
