#ifndef ERPCA_RNG_HPP
#define ERPCA_RNG_HPP

// Counter-based random numbers for reproducible simulation.
//
// The block function is Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). A stream is identified by (seed, stream id):
// the 64-bit seed is the Philox key (low word first) and the counter is
// (block_lo, block_hi, stream_lo, stream_hi). Each block yields four 32-bit
// words, consumed as two 64-bit draws (w0 | w1 << 32, then w2 | w3 << 32).
// Everything below is a pure function of (seed, stream, draw index), so
// other implementations can reproduce the sequences exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace erpca {

inline constexpr const char* kRngAlgorithm = "philox4x32-10";

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// SplitMix64 finaliser, used to derive per-trial seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint64_t draw_index() const { return index_; }

  /// 64-bit draw number `index` of this stream, without advancing.
  std::uint64_t at(std::uint64_t index) const {
    const std::uint64_t block = index >> 1;
    const PhiloxCounter out = philox4x32_10(
        {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        key_);
    const std::size_t w = (index & 1u) * 2;
    return static_cast<std::uint64_t>(out[w]) | (static_cast<std::uint64_t>(out[w + 1]) << 32);
  }

  std::uint64_t next_u64() {
    const std::uint64_t block = index_ >> 1;
    if (block != cached_block_ || !cache_valid_) {
      cache_ = philox4x32_10({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                              static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                             key_);
      cached_block_ = block;
      cache_valid_ = true;
    }
    const std::size_t w = (index_ & 1u) * 2;
    ++index_;
    return static_cast<std::uint64_t>(cache_[w]) | (static_cast<std::uint64_t>(cache_[w + 1]) << 32);
  }

  /// [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// (0, 1), never exactly 0.
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, k) by rejection from the largest multiple of k.
  std::uint64_t uniform_index(std::uint64_t k) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % k;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % k;
  }

  /// Box-Muller, cosine branch only: two uniforms per normal.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double bernoulli(double p) { return uniform() < p ? 1.0 : 0.0; }

  /// Rate parameterisation: mean 1 / rate.
  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  /// Knuth's product method below 10, Hormann's PTRS rejection above.
  double poisson(double lambda) {
    if (lambda <= 0.0) return 0.0;
    if (lambda < 10.0) {
      const double limit = std::exp(-lambda);
      double prod = uniform_open();
      double k = 0.0;
      while (prod > limit) {
        prod *= uniform_open();
        k += 1.0;
      }
      return k;
    }
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= vr) return k;
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -lambda + k * loglam - std::lgamma(k + 1.0)) {
        return k;
      }
    }
  }

 private:
  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  PhiloxCounter cache_{};
  std::uint64_t cached_block_ = 0;
  bool cache_valid_ = false;
};

}  // namespace erpca

#endif  // ERPCA_RNG_HPP
