#include "stabilis/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>

#include "stabilis/engine.hpp"
#include "stabilis/protocol.hpp"

namespace stabilis {

namespace {

constexpr std::size_t kKeptExamples = 8;

std::int64_t floor_div2(std::int64_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

std::string vec_str(const std::vector<std::int64_t>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + ")";
}

}  // namespace

void Report::fail(std::string what) {
  ++violations;
  if (examples.size() < kKeptExamples) examples.push_back(std::move(what));
}

Report check_helper_square(std::int64_t range) {
  if (range < 1) throw PreconditionViolated("range must be at least 1");
  Report r;
  r.name = "helper_square";
  for (std::int64_t x = -range; x <= range; ++x) {
    for (std::int64_t y = -range; y <= range; ++y) {
      ++r.cases;
      const std::int64_t lo = floor_div2(x + y);
      const std::int64_t hi = x + y - lo;
      const std::int64_t lhs = x * x + y * y - (lo * lo + hi * hi);
      // lhs >= ((x-y)^2 - 1) / 2, doubled to stay in integers.
      if (2 * lhs < (x - y) * (x - y) - 1) r.fail("x=" + std::to_string(x) + " y=" + std::to_string(y));
    }
  }
  return r;
}

Report check_helper_distance(const std::vector<std::vector<std::int64_t>>& vectors) {
  Report r;
  r.name = "helper_distance";
  for (const auto& x : vectors) {
    if (std::accumulate(x.begin(), x.end(), std::int64_t{0}) != 0) {
      throw PreconditionViolated("vector " + vec_str(x) + " does not sum to zero");
    }
    ++r.cases;
    std::int64_t pairwise = 0;
    std::int64_t squares = 0;
    for (std::int64_t a : x) {
      squares += a * a;
      for (std::int64_t b : x) pairwise += (a - b) * (a - b);
    }
    if (pairwise != 2 * static_cast<std::int64_t>(x.size()) * squares) r.fail(vec_str(x));
  }
  return r;
}

std::vector<std::vector<std::int64_t>> zero_sum_vectors(std::size_t max_len, std::int64_t bound) {
  std::vector<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> cur;
  // Fill all but the last entry freely; the last is forced to cancel the sum.
  std::function<void(std::size_t, std::int64_t)> rec = [&](std::size_t len, std::int64_t sum) {
    if (cur.size() + 1 == len) {
      if (-sum >= -bound && -sum <= bound) {
        cur.push_back(-sum);
        out.push_back(cur);
        cur.pop_back();
      }
      return;
    }
    for (std::int64_t v = -bound; v <= bound; ++v) {
      cur.push_back(v);
      rec(len, sum + v);
      cur.pop_back();
    }
  };
  for (std::size_t len = 1; len <= max_len; ++len) rec(len, 0);
  return out;
}

Report check_average_conservation(std::size_t k_max, std::uint64_t num_max, const PlacedAverage& average) {
  if (k_max == 0 || num_max == 0) throw PreconditionViolated("bounds must be positive");
  Report r;
  r.name = "average_conservation";
  std::vector<Prob> probs;

  auto check_list = [&]() {
    const std::size_t k = probs.size();
    std::uint64_t sum = 0;
    for (const Prob& p : probs) sum += p.numerator();
    const std::size_t residue = sum % k;
    // Every placement = every k-bit mask with `residue` bits set.
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != residue) continue;
      ++r.cases;
      bool bumped[64];
      for (std::size_t i = 0; i < k; ++i) bumped[i] = (mask >> i) & 1U;
      const std::span<const bool> placement(bumped, k);
      const auto out = average ? average(probs, placement) : average_with_placement(probs, placement);
      std::uint64_t out_sum = 0;
      std::uint64_t lo = ~std::uint64_t{0};
      std::uint64_t hi = 0;
      for (const Prob& p : out) {
        out_sum += p.numerator();
        lo = std::min(lo, p.numerator());
        hi = std::max(hi, p.numerator());
      }
      if (out_sum != sum || hi - lo > 1) {
        std::string s = "[";
        for (std::size_t i = 0; i < k; ++i) s += (i ? "," : "") + std::to_string(probs[i].numerator());
        r.fail(s + "] mask=" + std::to_string(mask));
      }
    }
  };

  std::function<void(std::size_t)> rec = [&](std::size_t len) {
    if (probs.size() == len) {
      check_list();
      return;
    }
    for (std::uint64_t v = 1; v <= num_max; ++v) {
      probs.emplace_back(v);
      rec(len);
      probs.pop_back();
    }
  };
  for (std::size_t len = 1; len <= k_max; ++len) rec(len);
  return r;
}

PingBoundResult check_ping_bound(const PingBoundInput& in) {
  const std::size_t n = in.numerators.size();
  if (n == 0 || n > 20) throw PreconditionViolated("ping bound check needs 1 <= n <= 20");
  if (in.bits == 0 || in.bits > 62) throw PreconditionViolated("bits must be in [1, 62]");
  const std::uint64_t one = std::uint64_t{1} << in.bits;
  u128 total = 0;
  for (std::uint64_t num : in.numerators) {
    if (num == 0 || num > one) throw PreconditionViolated("probabilities must lie in (0, 1]");
    total += num;
  }
  // P <= n/2  <=>  2 * total <= n * 2^bits
  if (2 * total > static_cast<u128>(n) * one) throw PreconditionViolated("ping bound check needs P <= n/2");
  if (in.trials == 0) throw PreconditionViolated("trials must be positive");

  std::vector<std::uint64_t> hits(n, 0);
  std::vector<std::size_t> attempted;
  attempted.reserve(n);
  for (std::uint64_t t = 0; t < in.trials; ++t) {
    Rng coins = Rng::stream(in.seed, t, StreamKind::Coins);
    attempted.clear();
    for (std::size_t v = 0; v < n; ++v) {
      if (coin_shows_heads(coins.bits(in.bits), Prob(in.numerators[v]))) attempted.push_back(v);
    }
    if (attempted.size() <= in.sigma) {
      for (std::size_t v : attempted) ++hits[v];
      continue;
    }
    Rng drop = Rng::stream(in.seed, t, StreamKind::Drop);
    for (std::size_t i : draw_survivors(attempted.size(), in.sigma, drop)) ++hits[attempted[i]];
  }

  PingBoundResult res;
  res.report.name = "ping_bound";
  const double P = static_cast<double>(total) / static_cast<double>(one);
  const auto T = static_cast<double>(in.trials);
  for (std::size_t v = 0; v < n; ++v) {
    ++res.report.cases;
    const double rate = static_cast<double>(hits[v]) / T;
    const double se = std::sqrt(rate * (1.0 - rate) / T);
    const double p = static_cast<double>(in.numerators[v]) / static_cast<double>(one);
    const double bound = p / (4.0 * P);
    res.success_rate.push_back(rate);
    res.bound.push_back(bound);
    if (rate + 4.0 * se < bound) {
      res.report.fail("client " + std::to_string(v) + ": rate " + std::to_string(rate) + " < bound " +
                      std::to_string(bound));
    }
  }
  return res;
}

std::vector<Report> verify_all(const VerifyBounds& bounds) {
  std::vector<Report> out;
  out.push_back(check_helper_square(bounds.square_range));
  out.push_back(check_helper_distance(zero_sum_vectors(bounds.distance_len, bounds.distance_bound)));
  PlacedAverage average;
  if (bounds.inject_fault) {
    average = [](std::span<const Prob> probs, std::span<const bool>) {
      std::uint64_t sum = 0;
      for (const Prob& p : probs) sum += p.numerator();
      return std::vector<Prob>(probs.size(), Prob(std::max<std::uint64_t>(1, sum / probs.size())));
    };
  }
  out.push_back(check_average_conservation(bounds.average_k, bounds.average_num, average));
  PingBoundInput ping;
  // n = 10, sigma = 1, every p = 1/20 on the 16-bit grid.
  ping.numerators.assign(10, (std::uint64_t{1} << 16) / 20 + 1);
  ping.bits = 16;
  ping.sigma = 1;
  ping.trials = bounds.ping_trials;
  ping.seed = bounds.seed;
  out.push_back(check_ping_bound(ping).report);
  return out;
}

}  // namespace stabilis
