#include "stabilis/core.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace stabilis {

namespace {

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Rational make_rational(i128 num, i128 den) {
  if (den == 0) throw OutOfRange("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const i128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  constexpr i128 lim = std::numeric_limits<std::int64_t>::max();
  if (num > lim || num < -lim || den > lim) throw OutOfRange("rational overflow");
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

// ceil(a / b) for b > 0.
i128 ceil_div(i128 a, i128 b) {
  i128 q = a / b;
  if (a % b != 0 && ((a > 0) == (b > 0))) ++q;
  return q;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw OutOfRange("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = g > 1 ? num / g : num;
  den_ = g > 1 ? den / g : den;
}

Rational Rational::parse(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  auto bad = [&]() { return OutOfRange("not a rational number: '" + std::string(text) + "'"); };

  auto parse_int = [&](std::string_view s) -> i128 {
    s = trim(s);
    bool neg = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
      neg = s.front() == '-';
      s.remove_prefix(1);
    }
    if (s.empty()) throw bad();
    i128 v = 0;
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw bad();
      v = v * 10 + (c - '0');
      if (v > std::numeric_limits<std::int64_t>::max()) throw bad();
    }
    return neg ? -v : v;
  };

  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    return make_rational(parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1)));
  }
  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    const std::string_view whole = text.substr(0, dot);
    const std::string_view frac = text.substr(dot + 1);
    if (frac.size() > 17) throw bad();
    const bool neg = !whole.empty() && whole.front() == '-';
    i128 den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const i128 w = (whole.empty() || whole == "-" || whole == "+") ? 0 : parse_int(whole);
    const i128 f = frac.empty() ? 0 : parse_int(frac);
    if (f < 0) throw bad();
    const i128 mag = (w < 0 ? -w : w) * den + f;
    return make_rational(neg ? -mag : mag, den);
  }
  return make_rational(parse_int(text), 1);
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  return make_rational(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                       static_cast<i128>(a.den_) * b.den_);
}
Rational operator-(const Rational& a, const Rational& b) {
  return make_rational(static_cast<i128>(a.num_) * b.den_ - static_cast<i128>(b.num_) * a.den_,
                       static_cast<i128>(a.den_) * b.den_);
}
Rational operator*(const Rational& a, const Rational& b) {
  return make_rational(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}
Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw OutOfRange("division by zero rational");
  return make_rational(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Strategy1: return "strategy1";
    case StrategyKind::Strategy2: return "strategy2";
    case StrategyKind::Fixed: return "fixed";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view text) {
  if (text == "strategy1" || text == "1") return StrategyKind::Strategy1;
  if (text == "strategy2" || text == "2") return StrategyKind::Strategy2;
  if (text == "fixed") return StrategyKind::Fixed;
  throw ConfigError("unknown strategy '" + std::string(text) + "' (expected strategy1, strategy2 or fixed)");
}

std::uint64_t Config::phat_numerator() const {
  const i128 scaled = static_cast<i128>(phat.num()) << precision_bits();
  if (scaled % phat.den() != 0) {
    throw ConfigError("phat = " + phat.str() + " is not a multiple of 1/2^" +
                      std::to_string(precision_bits()));
  }
  return static_cast<std::uint64_t>(scaled / phat.den());
}

void Config::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  constexpr std::int64_t kRationalLimit = std::int64_t{1} << 20;
  auto bounded = [&](const char* name, const Rational& r) {
    if (r.num() > kRationalLimit || r.num() < -kRationalLimit || r.den() > kRationalLimit) {
      fail(std::string(name) + " = " + r.str() + " exceeds the 2^20 numerator/denominator bound");
    }
  };
  if (W == 0 || b == 0) fail("W and b must be positive");
  if (precision_bits() > 62) fail("b*W must be at most 62");
  if (n == 0) fail("n must be at least 1");
  if (n > (1u << 20)) fail("n must be at most 2^20");
  if (W < 64 && static_cast<std::uint64_t>(n) >= (std::uint64_t{1} << W)) {
    fail("client identifiers 1..n must fit in W bits");
  }
  if (sigma < 1 || sigma > 64) fail("sigma must be in [1, 64]");
  bounded("L", L);
  bounded("R", R);
  bounded("epsilon", epsilon);
  bounded("phat", phat);
  bounded("frakc", frakc);
  bounded("c_delta", c_delta);
  bounded("weak_beta", weak_beta);
  if (!(Rational(1) <= L && L < R && R <= Rational(sigma))) fail("need 1 <= L < R <= sigma");
  if (epsilon <= Rational(0)) fail("epsilon must be positive");
  if (phat <= Rational(0) || phat > Rational(1)) fail("phat must be in (0, 1]");
  (void)phat_numerator();
  if (!(R - L > phat + epsilon + epsilon)) fail("need R - L > phat + 2*epsilon");
  if (frakc < Rational(1)) fail("frakc must be at least 1");
  if (c_delta <= Rational(0)) fail("c_delta must be positive");
  if (weak_beta <= Rational(0)) fail("weak_beta must be positive");
  if (fairness_c == 0) fail("fairness_c must be positive");
  if (mu && *mu < Rational(0)) fail("mu must be non-negative");
}

Prob prob_from_numerator(std::uint64_t num, const Config& cfg) {
  if (num == 0) throw OutOfRange("probability numerator 0 is not representable");
  if (num > cfg.phat_numerator()) {
    throw OutOfRange("probability numerator " + std::to_string(num) + " exceeds phat numerator " +
                     std::to_string(cfg.phat_numerator()));
  }
  return Prob(num);
}

std::vector<Prob> average_with_placement(std::span<const Prob> probs, std::span<const bool> bumped) {
  if (probs.empty()) throw PreconditionViolated("averaging needs at least one probability");
  if (bumped.size() != probs.size()) throw PreconditionViolated("placement size mismatch");
  u128 sum = 0;
  for (const Prob& p : probs) sum += p.numerator();
  const u128 k = probs.size();
  const auto base = static_cast<std::uint64_t>(sum / k);
  const auto residue = static_cast<std::size_t>(sum % k);
  if (static_cast<std::size_t>(std::count(bumped.begin(), bumped.end(), true)) != residue) {
    throw PreconditionViolated("placement must bump exactly (sum mod k) entries");
  }
  std::vector<Prob> out;
  out.reserve(probs.size());
  for (bool bump : bumped) out.emplace_back(base + (bump ? 1 : 0));
  return out;
}

std::vector<Prob> average_with_residue(std::span<const Prob> probs, Rng& rng) {
  if (probs.empty()) throw PreconditionViolated("averaging needs at least one probability");
  u128 sum = 0;
  for (const Prob& p : probs) sum += p.numerator();
  const std::size_t k = probs.size();
  const auto base = static_cast<std::uint64_t>(sum / k);
  const auto residue = static_cast<std::size_t>(sum % k);

  std::vector<Prob> out(k, Prob(base));
  if (residue == 0) return out;
  // Partial Fisher-Yates: the first `residue` slots of the permutation get +1.
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < residue; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(k - i));
    std::swap(idx[i], idx[j]);
    out[idx[i]] = Prob(base + 1);
  }
  return out;
}

Prob decrease(Prob p, std::uint32_t sigma) {
  if (sigma == 0) throw PreconditionViolated("sigma must be positive");
  const u128 scaled = static_cast<u128>(p.numerator()) * sigma / (sigma + 1);
  return Prob(std::max<std::uint64_t>(1, static_cast<std::uint64_t>(scaled)));
}

unsigned ceil_log2(std::uint64_t x) {
  if (x <= 1) return 0;
  return static_cast<unsigned>(std::bit_width(x - 1));
}

std::uint64_t polylog(std::uint64_t x) {
  const std::uint64_t l = ceil_log2(std::max<std::uint64_t>(x, 2));
  return l * l;
}

std::uint64_t ceil_sqrt(std::uint64_t x) {
  if (x <= 1) return x;
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(x)));
  while (static_cast<u128>(r) * r > x) --r;
  while (static_cast<u128>(r + 1) * (r + 1) <= x) ++r;
  return static_cast<u128>(r) * r == x ? r : r + 1;
}

Prob apply_visibility_floor(Prob p, std::uint64_t c0, const Config& cfg) {
  if (!cfg.visibility_floor_enabled || cfg.strategy != StrategyKind::Strategy2) return p;
  const u128 denom = static_cast<u128>(std::max<std::uint64_t>(c0, 1)) * polylog(c0);
  const u128 one = cfg.one();
  auto floor_num = static_cast<std::uint64_t>((one + denom - 1) / denom);
  floor_num = std::clamp<std::uint64_t>(floor_num, 1, cfg.phat_numerator());
  return p.numerator() >= floor_num ? p : Prob(floor_num);
}

namespace {

// 2 * sigma * frakc * (L + eps) / eps^2
Rational window_slope(const Config& cfg) {
  const Rational eps = cfg.epsilon;
  return Rational(2) * Rational(cfg.sigma) * cfg.frakc * (cfg.L + eps) / (eps * eps);
}

}  // namespace

std::uint64_t delta_analytic_log2(long double log2_n, const Config& cfg) {
  const Rational slope = window_slope(cfg);
  if (log2_n == std::floor(log2_n) && log2_n >= 0 && log2_n < 1e15L) {
    const auto l = static_cast<i128>(log2_n);
    const i128 v = ceil_div(static_cast<i128>(slope.num()) * l, slope.den());
    return static_cast<std::uint64_t>(std::max<i128>(1, v));
  }
  const long double v = std::ceil(static_cast<long double>(slope.num()) * log2_n / slope.den());
  return v < 1 ? 1 : static_cast<std::uint64_t>(v);
}

std::uint64_t delta_analytic(std::uint64_t n_est, const Config& cfg) {
  n_est = std::max<std::uint64_t>(n_est, 2);
  if (std::has_single_bit(n_est)) {
    return delta_analytic_log2(static_cast<long double>(std::countr_zero(n_est)), cfg);
  }
  return delta_analytic_log2(std::log2(static_cast<long double>(n_est)), cfg);
}

}  // namespace stabilis
