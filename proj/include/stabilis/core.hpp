#pragma once

// Shared vocabulary: exact rationals for protocol constants, the fixed-point
// probability grid, identifiers, messages and the run configuration.

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stabilis/errors.hpp"
#include "stabilis/rng.hpp"

namespace stabilis {

using i128 = __int128;
using u128 = unsigned __int128;

/// Exact rational with a positive denominator, always reduced.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT(google-explicit-constructor)
  Rational(std::int64_t num, std::int64_t den);

  /// Accepts "3", "-2", "1/4" or a finite decimal like "0.25".
  static Rational parse(std::string_view text);

  constexpr std::int64_t num() const { return num_; }
  constexpr std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);

  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    return static_cast<i128>(a.num_) * b.den_ <=> static_cast<i128>(b.num_) * a.den_;
  }

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct ClientId {
  std::uint64_t value = 0;
  friend auto operator<=>(const ClientId&, const ClientId&) = default;
};

/// A probability on the grid 1/2^{bW}. Only the numerator is stored; the grid
/// exponent lives in Config. The constructor accepts any numerator >= 1;
/// `prob_from_numerator` additionally checks the p-hat ceiling.
class Prob {
 public:
  constexpr explicit Prob(std::uint64_t numerator) : num_(numerator) {}
  constexpr std::uint64_t numerator() const { return num_; }
  friend auto operator<=>(const Prob&, const Prob&) = default;

 private:
  std::uint64_t num_;
};

struct PingMessage {
  ClientId sender;
  Prob prob;
};

struct ReplyMessage {
  ClientId target;
  Prob new_prob;
  friend bool operator==(const ReplyMessage&, const ReplyMessage&) = default;
};

enum class StrategyKind { Strategy1, Strategy2, Fixed };
enum class DeltaFormula { Raw, Analytic };

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view text);

struct Config {
  std::uint32_t n = 8;
  std::uint32_t sigma = 8;
  Rational L{1};
  Rational R{3};
  Rational epsilon{1, 4};
  Rational phat{1};
  std::uint32_t W = 16;
  std::uint32_t b = 1;
  Rational frakc{1};

  StrategyKind strategy = StrategyKind::Fixed;
  /// Window emitted by the Fixed strategy; 0 means "use delta_analytic(n)".
  std::uint64_t fixed_delta = 0;
  DeltaFormula delta_formula = DeltaFormula::Raw;
  Rational c_delta{1};
  bool visibility_floor_enabled = false;

  std::uint64_t seed = 1;
  std::uint64_t hash_seed = 0x5eed5eedULL;
  std::uint64_t server_id = 0;

  /// Metric constants: fairness exponent, weak-fairness factor, stability
  /// constant multiplying ceil(sqrt(n)).
  std::uint32_t fairness_c = 1;
  Rational weak_beta{1, 16};
  std::optional<Rational> mu;

  unsigned precision_bits() const { return b * W; }
  std::uint64_t one() const { return std::uint64_t{1} << precision_bits(); }
  std::uint64_t phat_numerator() const;

  /// Throws ConfigError naming the violated constraint.
  void validate() const;
};

Prob prob_from_numerator(std::uint64_t num, const Config& cfg);

/// Mean of the numerators, floor, plus (S mod k) one-ulp increments placed
/// uniformly at random without replacement. The output sum equals the input
/// sum exactly.
std::vector<Prob> average_with_residue(std::span<const Prob> probs, Rng& rng);

/// Same as average_with_residue, with the residue positions given
/// explicitly. `bumped` must hold exactly (S mod k) true entries.
std::vector<Prob> average_with_placement(std::span<const Prob> probs, std::span<const bool> bumped);

/// p / (1 + 1/sigma), rounded down, never below one ulp.
Prob decrease(Prob p, std::uint32_t sigma);

/// max(p, floor) with floor = ceil(2^{bW} / (c0 * ceil(log2 max(c0,2))^2)),
/// capped at p-hat. Identity unless Strategy 2 and the floor is enabled.
Prob apply_visibility_floor(Prob p, std::uint64_t c0, const Config& cfg);

/// ceil(log2(max(x, 2))) squared; the polylog used throughout.
std::uint64_t polylog(std::uint64_t x);
unsigned ceil_log2(std::uint64_t x);
std::uint64_t ceil_sqrt(std::uint64_t x);

/// Window length 2*sigma*frakc*log2(n) * (L+eps) / eps^2, rounded up, >= 1.
std::uint64_t delta_analytic(std::uint64_t n_est, const Config& cfg);
/// Same formula with a real-valued log2(n) (used by Strategy 1).
std::uint64_t delta_analytic_log2(long double log2_n, const Config& cfg);

}  // namespace stabilis
