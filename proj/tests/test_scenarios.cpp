#include <algorithm>
#include <cmath>

#include "catch_amalgamated.hpp"
#include "stabilis/metrics.hpp"
#include "stabilis/scenarios.hpp"

using namespace stabilis;

namespace {

void check_type_invariants(const World& w) {
  const Config& cfg = w.cfg;
  REQUIRE(w.clients.size() == cfg.n);
  for (std::size_t i = 0; i < w.clients.size(); ++i) {
    REQUIRE(w.clients[i].id == ClientId{i + 1});
    REQUIRE(w.clients[i].p.numerator() >= 1);
    REQUIRE(w.clients[i].p.numerator() <= cfg.phat_numerator());
  }
  REQUIRE(w.server.window >= 1);
  REQUIRE(w.server.delta < w.server.window);
  REQUIRE(w.server.X <= w.server.delta * cfg.sigma + cfg.sigma);
  if (const auto* s2 = std::get_if<Strategy2State>(&w.server.estimator)) {
    REQUIRE(s2->table.well_formed());
    for (const Column& c : s2->table.columns()) REQUIRE(c.t <= deletion_threshold(c.c, cfg.frakc) + 1);
  }
}

std::vector<std::uint64_t> heads(const World& w) {
  std::vector<std::uint64_t> out;
  for (const Column& c : std::get<Strategy2State>(w.server.estimator).table.columns()) out.push_back(c.c);
  return out;
}

}  // namespace

TEST_CASE("arbitrary worlds") {
  Config cfg;
  cfg.n = 16;
  SECTION("same seed, same world") {
    cfg.strategy = StrategyKind::Strategy2;
    const World a = make_world(cfg, Scenario{ScenarioKind::Arbitrary});
    const World b = make_world(cfg, Scenario{ScenarioKind::Arbitrary});
    CHECK(a.clients == b.clients);
    CHECK(a.server.X == b.server.X);
    CHECK(a.server.window == b.server.window);
    CHECK(a.server.estimator == b.server.estimator);
  }
  SECTION("type invariants over 1000 seeds") {
    for (auto strategy : {StrategyKind::Fixed, StrategyKind::Strategy1, StrategyKind::Strategy2}) {
      cfg.strategy = strategy;
      for (std::uint64_t s = 1; s <= 1000; ++s) {
        cfg.seed = s;
        check_type_invariants(make_world(cfg, Scenario{ScenarioKind::Arbitrary}));
      }
    }
  }
  SECTION("numerators are uniform") {
    std::vector<double> xs;
    for (std::uint64_t s = 1; s <= 500; ++s) {
      cfg.seed = s;
      for (const ClientState& c : make_world(cfg, Scenario{ScenarioKind::Arbitrary}).clients) {
        xs.push_back(static_cast<double>(c.p.numerator()) / static_cast<double>(cfg.phat_numerator()));
      }
    }
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) d = std::max({d, (i + 1) / n - xs[i], xs[i] - i / n});
    CHECK(d < 1.628 / std::sqrt(n));
  }
  SECTION("window spans magnitudes up to n^2") {
    std::uint64_t lo = ~std::uint64_t{0};
    std::uint64_t hi = 0;
    for (std::uint64_t s = 1; s <= 500; ++s) {
      cfg.seed = s;
      const World w = make_world(cfg, Scenario{ScenarioKind::Arbitrary});
      lo = std::min(lo, w.server.window);
      hi = std::max(hi, w.server.window);
    }
    CHECK(lo <= 2);
    CHECK(hi >= 128);
    CHECK(hi <= 256);
  }
}

TEST_CASE("extreme total probability") {
  Config cfg;
  cfg.n = 256;
  SECTION("one ulp each") {
    const World w = make_world(cfg, Scenario{ScenarioKind::LowP, 1});
    CHECK(total_probability(w) == Exact(1, 256));
    CHECK(snapshot(w).P == Exact(256) / Exact(65536));
    check_type_invariants(w);
  }
  SECTION("all at phat") {
    const World w = make_world(cfg, Scenario{ScenarioKind::HighP});
    CHECK(total_probability(w) == Exact(256));
  }
  SECTION("target above phat is rejected") {
    CHECK_THROWS_AS(make_world(cfg, Scenario{ScenarioKind::LowP, 70000}), OutOfRange);
  }
}

TEST_CASE("corrupted table") {
  Config cfg;
  cfg.n = 16;
  cfg.strategy = StrategyKind::Strategy2;
  const World w = make_world(cfg, Scenario{ScenarioKind::CorruptTable});
  CHECK(heads(w) == std::vector<std::uint64_t>{65536, 256, 16, 4, 2});
  check_type_invariants(w);
  CHECK(is_safe(w));
  CHECK(w.server.window == 16);
  CHECK(heads(make_world(cfg, Scenario{ScenarioKind::CorruptTable, 0, 2})) == std::vector<std::uint64_t>{2});
  cfg.strategy = StrategyKind::Strategy1;
  CHECK_THROWS_AS(make_world(cfg, Scenario{ScenarioKind::CorruptTable}), StrategyMismatch);
}

TEST_CASE("legitimate worlds") {
  Config cfg;
  cfg.n = 64;
  for (auto strategy : {StrategyKind::Fixed, StrategyKind::Strategy1, StrategyKind::Strategy2}) {
    cfg.strategy = strategy;
    const World w = make_world(cfg, Scenario{ScenarioKind::Legitimate});
    CHECK(is_legitimate(w));
    const Exact P = total_probability(w);
    CHECK(P >= Exact(5, 4));
    CHECK(P <= Exact(11, 4));
    CHECK(max_numerator(w) - min_numerator(w) <= 1);
    check_type_invariants(w);
  }
  cfg.strategy = StrategyKind::Fixed;
  CHECK(make_world(cfg, Scenario{ScenarioKind::Legitimate}).server.window == delta_analytic(64, cfg));
  cfg.strategy = StrategyKind::Strategy2;
  CHECK(heads(make_world(cfg, Scenario{ScenarioKind::Legitimate})).front() == 64);

  SECTION("a single client cannot carry P >= L + eps above phat") {
    cfg.n = 1;
    CHECK_THROWS_AS(make_world(cfg, Scenario{ScenarioKind::Legitimate}), Infeasible);
  }
  SECTION("an equal split above phat is infeasible") {
    cfg.n = 2;
    cfg.phat = Rational(1, 2);
    cfg.strategy = StrategyKind::Fixed;
    CHECK_THROWS_AS(make_world(cfg, Scenario{ScenarioKind::Legitimate}), Infeasible);
  }
}

TEST_CASE("scenario names round-trip") {
  for (const char* name : {"arbitrary", "low_p", "low_p:7", "high_p", "corrupt_table", "corrupt_table:256", "legitimate"}) {
    CHECK(Scenario::parse(name).name() == name);
  }
  CHECK(Scenario::parse("low_p:7").target_numerator == 7);
  CHECK_THROWS_AS(Scenario::parse("low_p:x"), ConfigError);
  CHECK_THROWS_AS(Scenario::parse("mystery"), ConfigError);
}

TEST_CASE("spread_evenly") {
  CHECK(spread_evenly(10, 3) == std::vector<std::uint64_t>{4, 3, 3});
  CHECK(spread_evenly(9, 3) == std::vector<std::uint64_t>{3, 3, 3});
}
