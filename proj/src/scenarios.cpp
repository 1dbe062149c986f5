#include "stabilis/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "stabilis/metrics.hpp"

namespace stabilis {

namespace {

std::uint64_t log_uniform(std::uint64_t lo, std::uint64_t hi, Rng& rng) {
  if (hi <= lo) return lo;
  const double a = std::log2(static_cast<double>(lo));
  const double b = std::log2(static_cast<double>(hi));
  const double v = std::exp2(a + (b - a) * rng.unit());
  return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(v)), lo, hi);
}

std::uint64_t n_squared(const Config& cfg) { return static_cast<std::uint64_t>(cfg.n) * cfg.n; }

void corrupt_counters(World& w, Rng& rng) {
  ServerState& s = w.server;
  s.window = log_uniform(1, std::max<std::uint64_t>(1, n_squared(w.cfg)), rng);
  s.delta = rng.below(s.window);
  s.X = rng.between(0, s.delta * w.cfg.sigma);
  s.flag = static_cast<Flag>(static_cast<int>(rng.below(3)) - 1);
}

void randomize_timestamps(EstimatorTable& table, const Rational& frakc, Rng& rng) {
  for (Column& col : table.mutable_columns()) col.t = rng.between(0, deletion_threshold(col.c, frakc));
}

void assign_numerators(World& w, const std::vector<std::uint64_t>& nums) {
  for (std::size_t i = 0; i < w.clients.size(); ++i) w.clients[i].p = Prob(nums[i]);
}

// Numerator total at the midpoint of [L + eps, R - eps], floored to the grid.
std::uint64_t legitimate_total(const Config& cfg) {
  const Rational mid = (cfg.L + cfg.R) / Rational(2);
  return static_cast<std::uint64_t>((static_cast<u128>(mid.num()) << cfg.precision_bits()) /
                                    static_cast<u128>(mid.den()));
}

void place_at_legitimate_midpoint(World& w) {
  const Config& cfg = w.cfg;
  const std::uint64_t total = legitimate_total(cfg);
  const Rational lo = cfg.L + cfg.epsilon;
  const Rational hi = cfg.R - cfg.epsilon;
  const i128 s = total;
  const i128 one = static_cast<i128>(cfg.one());
  if (s * lo.den() < static_cast<i128>(lo.num()) * one || s * hi.den() > static_cast<i128>(hi.num()) * one) {
    throw Infeasible("the probability grid cannot hit [L+eps, R-eps]");
  }
  const auto nums = spread_evenly(total, cfg.n);
  if (nums.front() > cfg.phat_numerator() || nums.back() == 0) {
    throw Infeasible("equal split of the legitimate midpoint does not fit in [1 ulp, phat]");
  }
  assign_numerators(w, nums);
}

}  // namespace

std::vector<std::uint64_t> spread_evenly(std::uint64_t total, std::size_t n) {
  std::vector<std::uint64_t> out(n, total / n);
  for (std::size_t i = 0; i < total % n; ++i) ++out[i];
  return out;
}

World gen_arbitrary(const Config& cfg, Rng& rng) {
  World w = World::create(cfg);
  const std::uint64_t top = cfg.phat_numerator();
  for (ClientState& c : w.clients) c.p = Prob(rng.between(1, top));
  corrupt_counters(w, rng);
  if (auto* s1 = std::get_if<Strategy1State>(&w.server.estimator)) {
    const std::uint64_t id_space = cfg.W >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << cfg.W) - 1;
    s1->vhat = ClientId{rng.between(0, id_space)};
  } else if (auto* s2 = std::get_if<Strategy2State>(&w.server.estimator)) {
    s2->table = EstimatorTable::from_head(log_uniform(2, std::max<std::uint64_t>(4, n_squared(cfg)), rng));
    randomize_timestamps(s2->table, cfg.frakc, rng);
  }
  return w;
}

World gen_low_P(const Config& cfg, Prob target, Rng& rng) {
  World w = World::create(cfg);
  const Prob p = prob_from_numerator(target.numerator(), cfg);
  for (ClientState& c : w.clients) c.p = p;
  corrupt_counters(w, rng);
  return w;
}

World gen_corrupt_table(const Config& cfg, std::uint64_t head, Rng& rng) {
  if (cfg.strategy != StrategyKind::Strategy2) {
    throw StrategyMismatch("a corrupted table needs the table strategy");
  }
  World w = World::create(cfg);
  place_at_legitimate_midpoint(w);
  EstimatorTable table = EstimatorTable::from_head(head);
  randomize_timestamps(table, cfg.frakc, rng);
  w.server.window = strategy2_delta(table, cfg);
  w.server.estimator = Strategy2State{std::move(table)};
  return w;
}

World gen_legitimate(const Config& cfg, Rng& rng) {
  (void)rng;
  World w = World::create(cfg);
  place_at_legitimate_midpoint(w);

  const HashFn h = w.hash();
  if (auto* s1 = std::get_if<Strategy1State>(&w.server.estimator)) {
    std::optional<std::uint64_t> best;
    for (const ClientState& c : w.clients) {
      const std::uint64_t d = unit_distance(h(w.server_id()), h(c.id));
      if (d != 0 && (!best || d < *best)) {
        best = d;
        s1->vhat = c.id;
      }
    }
  } else if (auto* s2 = std::get_if<Strategy2State>(&w.server.estimator)) {
    const std::uint64_t root = ceil_sqrt(cfg.n);
    s2->table = EstimatorTable::from_head(std::max<std::uint64_t>(2, root * root));
  }
  w.server.window = estimator_delta(w.server.estimator, w.server_id(), h, cfg).value_or(delta_analytic(cfg.n, cfg));
  w.server.X = 0;
  w.server.delta = 0;
  w.server.flag = Flag::None;

  if (!is_legitimate(w)) throw Infeasible("constructed state is not legitimate under this configuration");
  return w;
}

std::string Scenario::name() const {
  switch (kind) {
    case ScenarioKind::Arbitrary: return "arbitrary";
    case ScenarioKind::LowP: return target_numerator == 1 ? "low_p" : "low_p:" + std::to_string(target_numerator);
    case ScenarioKind::HighP: return "high_p";
    case ScenarioKind::CorruptTable: return head == 0 ? "corrupt_table" : "corrupt_table:" + std::to_string(head);
    case ScenarioKind::Legitimate: return "legitimate";
  }
  return "?";
}

Scenario Scenario::parse(std::string_view text) {
  auto number_after = [&](std::string_view prefix) -> std::uint64_t {
    const std::string_view rest = text.substr(prefix.size());
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) {
      throw ConfigError("bad scenario parameter in '" + std::string(text) + "'");
    }
    return v;
  };
  Scenario s;
  if (text == "arbitrary") {
    s.kind = ScenarioKind::Arbitrary;
  } else if (text == "low_p") {
    s.kind = ScenarioKind::LowP;
  } else if (text.starts_with("low_p:")) {
    s.kind = ScenarioKind::LowP;
    s.target_numerator = number_after("low_p:");
  } else if (text == "high_p") {
    s.kind = ScenarioKind::HighP;
  } else if (text == "corrupt_table") {
    s.kind = ScenarioKind::CorruptTable;
  } else if (text.starts_with("corrupt_table:")) {
    s.kind = ScenarioKind::CorruptTable;
    s.head = number_after("corrupt_table:");
  } else if (text == "legitimate") {
    s.kind = ScenarioKind::Legitimate;
  } else {
    throw ConfigError("unknown scenario '" + std::string(text) + "'");
  }
  return s;
}

World make_world(const Config& cfg, const Scenario& scenario) {
  Rng rng = Rng::stream(mix64(cfg.seed), 0, StreamKind::Setup);
  switch (scenario.kind) {
    case ScenarioKind::Arbitrary: return gen_arbitrary(cfg, rng);
    case ScenarioKind::LowP: return gen_low_P(cfg, Prob(scenario.target_numerator), rng);
    case ScenarioKind::HighP: return gen_low_P(cfg, Prob(cfg.phat_numerator()), rng);
    case ScenarioKind::CorruptTable: {
      const std::uint64_t n = cfg.n;
      const std::uint64_t head = scenario.head != 0 ? scenario.head : std::max<std::uint64_t>(2, n * n * n * n);
      return gen_corrupt_table(cfg, head, rng);
    }
    case ScenarioKind::Legitimate: return gen_legitimate(cfg, rng);
  }
  throw ConfigError("unknown scenario");
}

}  // namespace stabilis
