#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace ccgen {

// Seeded random source whose outputs are identical on every platform.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions do not, so all derived draws (reals, bounded integers,
// shuffles) are computed here from raw engine words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, stream) pairs, e.g. one per record.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Index drawn proportionally to non-negative weights; the weights must not
  // all be zero.
  std::size_t categorical(std::span<const double> weights);

  // Fisher-Yates, front to back.
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t j = i + below(n - i);
      using std::swap;
      swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace ccgen
