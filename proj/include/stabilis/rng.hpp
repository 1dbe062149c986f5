#pragma once

// Counter-based 64-bit generator.
//
// Every draw is mix64(key + counter * kGamma), i.e. SplitMix64 with an
// explicit counter. A trial owns one key; per-round, per-purpose streams are
// derived with `Rng::stream` so that the coins drawn in round r never depend
// on how many draws some other purpose (drop sampling, residue placement,
// instrumentation) consumed before it.

#include <bit>
#include <cstdint>
#include <limits>

namespace stabilis {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class StreamKind : std::uint64_t {
  Setup = 1,
  Coins = 2,
  Drop = 3,
  Residue = 4,
  Oracle = 5,
};

class Rng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  constexpr explicit Rng(std::uint64_t key) : key_(key) {}

  /// Independent substream keyed by (key, round, kind).
  static constexpr Rng stream(std::uint64_t key, std::uint64_t round, StreamKind kind) {
    std::uint64_t k = mix64(key ^ mix64(round + 0x632be59bd9b4e019ULL));
    k = mix64(k + static_cast<std::uint64_t>(kind) * 0xd1b54a32d192ed03ULL);
    return Rng(k);
  }

  constexpr Rng split(std::uint64_t id) const {
    return Rng(mix64(key_ ^ mix64(id * kGamma + 0x8cb92ba72f3d8dd7ULL)));
  }

  constexpr std::uint64_t next() { return mix64(key_ + kGamma * ++counter_); }

  constexpr std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return std::numeric_limits<std::uint64_t>::max(); }

  /// Top `k` bits of one draw, k in [1, 64].
  constexpr std::uint64_t bits(unsigned k) { return k >= 64 ? next() : next() >> (64 - k); }

  /// Uniform in [0, bound), bound >= 1. Lemire's multiply-and-reject.
  constexpr std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform in [lo, hi] inclusive.
  constexpr std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    if (hi - lo == std::numeric_limits<std::uint64_t>::max()) return next();
    return lo + below(hi - lo + 1);
  }

  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace stabilis
