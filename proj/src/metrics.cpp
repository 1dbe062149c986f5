#include "stabilis/metrics.hpp"

#include <algorithm>
#include <limits>

namespace stabilis {

namespace {

BigInt to_big(u128 v) {
  BigInt out = static_cast<std::uint64_t>(v >> 64);
  out <<= 64;
  out += static_cast<std::uint64_t>(v);
  return out;
}

BigInt pow2(unsigned k) { return BigInt(1) << k; }

}  // namespace

Exact to_exact(const Rational& r) { return Exact(BigInt(r.num()), BigInt(r.den())); }

std::string exact_str(const Exact& x) {
  const BigInt num = boost::multiprecision::numerator(x);
  const BigInt den = boost::multiprecision::denominator(x);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

double exact_to_double(const Exact& x) { return x.convert_to<double>(); }

u128 numerator_sum(const World& world) {
  u128 s = 0;
  for (const ClientState& c : world.clients) s += c.p.numerator();
  return s;
}

Exact total_probability(const World& world) {
  return Exact(to_big(numerator_sum(world)), pow2(world.cfg.precision_bits()));
}

std::uint64_t min_numerator(const World& world) {
  std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
  for (const ClientState& c : world.clients) m = std::min(m, c.p.numerator());
  return m;
}

std::uint64_t max_numerator(const World& world) {
  std::uint64_t m = 0;
  for (const ClientState& c : world.clients) m = std::max(m, c.p.numerator());
  return m;
}

bool is_busy(const World& world) {
  // L <= S / 2^{bW} <= R with S the numerator sum; all factors stay below
  // 2^103 under the configuration bounds.
  const Config& cfg = world.cfg;
  const i128 s = static_cast<i128>(numerator_sum(world));
  const i128 one = static_cast<i128>(cfg.one());
  return static_cast<i128>(cfg.L.num()) * one <= s * cfg.L.den() &&
         s * cfg.R.den() <= static_cast<i128>(cfg.R.num()) * one;
}

bool is_fair(const World& world, std::uint32_t c) {
  if (c == 0) throw PreconditionViolated("fairness exponent must be positive");
  // sum (n*num_v - S)^2 / (n^2 4^{bW}) <= 1/n^c
  const BigInt n = world.clients.size();
  const BigInt s = to_big(numerator_sum(world));
  BigInt lhs = 0;
  for (const ClientState& cl : world.clients) {
    const BigInt dev = n * cl.p.numerator() - s;
    lhs += dev * dev;
  }
  lhs *= boost::multiprecision::pow(n, c);
  const BigInt rhs = n * n * pow2(2 * world.cfg.precision_bits());
  return lhs <= rhs;
}

bool is_weakly_fair(const World& world, const Rational& beta) {
  if (beta <= Rational(0)) throw PreconditionViolated("beta must be positive");
  // min_v num_v >= beta * S / n  <=>  min * n * beta.den >= beta.num * S
  const i128 n = static_cast<i128>(world.clients.size());
  const i128 s = static_cast<i128>(numerator_sum(world));
  const i128 m = static_cast<i128>(min_numerator(world));
  return m * n * beta.den() >= static_cast<i128>(beta.num()) * s;
}

bool is_stable(const World& world) {
  const auto* s2 = std::get_if<Strategy2State>(&world.server.estimator);
  if (s2 == nullptr) throw StrategyMismatch("stability is defined for the table strategy only");
  return s2->table.head() >= ceil_sqrt(world.cfg.n) && s2->table.all_timestamps_zero();
}

Exact phi_sq(const World& world) {
  const BigInt n = world.clients.size();
  const BigInt s = to_big(numerator_sum(world));
  BigInt acc = 0;
  for (const ClientState& c : world.clients) {
    const BigInt dev = n * c.p.numerator() - s;
    acc += dev * dev;
  }
  return Exact(acc, n * n * pow2(2 * world.cfg.precision_bits()));
}

Exact phi_minmax(const World& world) {
  return Exact(BigInt(max_numerator(world) - min_numerator(world)), pow2(world.cfg.precision_bits()));
}

Exact phi_mu(const World& world, const Rational& mu) {
  if (mu < Rational(0)) throw PreconditionViolated("mu must be non-negative");
  const Exact threshold = to_exact(mu) * Exact(pow2(world.cfg.precision_bits()));
  Exact acc = 0;
  for (const ClientState& c : world.clients) {
    const Exact gap = threshold - Exact(BigInt(c.p.numerator()));
    if (gap > 0) acc += gap * gap;
  }
  return acc;
}

bool is_safe(const World& world) { return is_busy(world) && is_weakly_fair(world, world.cfg.weak_beta); }

bool is_legitimate(const World& world) {
  if (!is_safe(world)) return false;
  if (world.cfg.strategy == StrategyKind::Strategy2) return is_stable(world);
  return true;
}

MetricsSnapshot snapshot(const World& world) {
  MetricsSnapshot s;
  s.round = world.round;
  s.P = total_probability(world);
  s.p_min = min_numerator(world);
  s.phi_sq = phi_sq(world);
  s.phi_minmax = phi_minmax(world);
  if (world.cfg.mu) {
    s.phi_mu = phi_mu(world, *world.cfg.mu);
  } else {
    // Default threshold beta * P / n, in probability units.
    const Exact mu = to_exact(world.cfg.weak_beta) * s.P / Exact(BigInt(world.clients.size()));
    const Exact threshold = mu * Exact(pow2(world.cfg.precision_bits()));
    Exact acc = 0;
    for (const ClientState& c : world.clients) {
      const Exact gap = threshold - Exact(BigInt(c.p.numerator()));
      if (gap > 0) acc += gap * gap;
    }
    s.phi_mu = acc;
  }
  s.busy = is_busy(world);
  s.fair = is_fair(world, world.cfg.fairness_c);
  s.weakly_fair = is_weakly_fair(world, world.cfg.weak_beta);
  if (std::holds_alternative<Strategy2State>(world.server.estimator)) s.stable = is_stable(world);
  return s;
}

MetricsSnapshot MetricsTracker::observe(const World& world) {
  MetricsSnapshot s = snapshot(world);
  if (const auto* s2 = std::get_if<Strategy2State>(&world.server.estimator)) {
    if (s2->table.all_timestamps_zero()) last_all_zero_ = world.round;
    if (last_all_zero_) s.rounds_since_all_zero = world.round - *last_all_zero_;
  }
  return s;
}

}  // namespace stabilis
