#pragma once

// Legitimacy predicates and potentials, evaluated exactly on the probability
// grid. Every function here reads client/server state only.

#include <cstdint>
#include <optional>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "stabilis/engine.hpp"

namespace stabilis {

using BigInt = boost::multiprecision::cpp_int;
using Exact = boost::multiprecision::cpp_rational;

Exact to_exact(const Rational& r);
std::string exact_str(const Exact& x);
double exact_to_double(const Exact& x);

/// Sum of client numerators (P in ulps).
u128 numerator_sum(const World& world);
Exact total_probability(const World& world);
std::uint64_t min_numerator(const World& world);
std::uint64_t max_numerator(const World& world);

bool is_busy(const World& world);
bool is_fair(const World& world, std::uint32_t c);
bool is_weakly_fair(const World& world, const Rational& beta);
/// c_0 >= ceil(sqrt(n)) and every timestamp zero. Strategy 2 only.
bool is_stable(const World& world);

/// Sum over clients of (p(v) - P/n)^2.
Exact phi_sq(const World& world);
/// p_max - p_min.
Exact phi_minmax(const World& world);
/// Sum over clients of max(0, mu * 2^{bW} - numerator)^2, in ulp^2 units.
Exact phi_mu(const World& world, const Rational& mu);

/// Busy, weakly fair and (under Strategy 2) stable.
bool is_legitimate(const World& world);
/// Busy and weakly fair.
bool is_safe(const World& world);

struct MetricsSnapshot {
  std::uint64_t round = 0;
  Exact P;
  std::uint64_t p_min = 0;
  Exact phi_sq;
  Exact phi_minmax;
  Exact phi_mu;
  bool busy = false;
  bool fair = false;
  bool weakly_fair = false;
  /// Empty unless Strategy 2 is active.
  std::optional<bool> stable;
  /// Rounds since every timestamp was last zero (Strategy 2 only).
  std::optional<std::uint64_t> rounds_since_all_zero;
};

MetricsSnapshot snapshot(const World& world);

/// Folds snapshots over a run to report rounds since the table was last
/// all-zero.
class MetricsTracker {
 public:
  MetricsSnapshot observe(const World& world);

 private:
  std::optional<std::uint64_t> last_all_zero_;
};

}  // namespace stabilis
