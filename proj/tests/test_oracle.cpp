#include <algorithm>
#include <cmath>
#include <numeric>

#include "catch_amalgamated.hpp"
#include "stabilis/oracle.hpp"

using namespace stabilis;

namespace {

std::int64_t pairwise(const std::vector<std::int64_t>& x) {
  std::int64_t s = 0;
  for (auto a : x) {
    for (auto b : x) s += (a - b) * (a - b);
  }
  return s;
}

}  // namespace

TEST_CASE("helper square") {
  // x = y: 0 >= -1/2; x = 3, y = 0: 9 - (1 + 4) = 4 >= (9 - 1) / 2
  CHECK(check_helper_square(1).ok());
  const Report r = check_helper_square(100);
  CHECK(r.ok());
  CHECK(r.cases == 201u * 201u);
  CHECK(9 - (1 + 4) == (9 - 1) / 2);
  CHECK_THROWS_AS(check_helper_square(0), PreconditionViolated);
}

TEST_CASE("helper distance") {
  CHECK(pairwise({1, -1}) == 8);
  CHECK(pairwise({2, -1, -1}) == 36);
  const Report r = check_helper_distance({{1, -1}, {0, 0, 0}, {2, -1, -1}});
  CHECK(r.ok());
  CHECK(r.cases == 3);
  CHECK_THROWS_AS(check_helper_distance({{1, 1}}), PreconditionViolated);

  const auto vs = zero_sum_vectors(4, 5);
  CHECK(vs.size() == 994);
  for (const auto& v : vs) REQUIRE(std::accumulate(v.begin(), v.end(), std::int64_t{0}) == 0);
  CHECK(check_helper_distance(vs).ok());
}

TEST_CASE("average conservation") {
  CHECK(check_average_conservation(1, 16).ok());
  const Report two = check_average_conservation(2, 8);
  CHECK(two.ok());
  CHECK(two.cases >= 64);
  const Report four = check_average_conservation(4, 16);
  CHECK(four.ok());
  CHECK(four.cases == 255716);

  // an averager that drops the residue must be caught
  const PlacedAverage lossy = [](std::span<const Prob> probs, std::span<const bool>) {
    std::uint64_t s = 0;
    for (const Prob& p : probs) s += p.numerator();
    return std::vector<Prob>(probs.size(), Prob(std::max<std::uint64_t>(1, s / probs.size())));
  };
  const Report bad = check_average_conservation(3, 8, lossy);
  CHECK_FALSE(bad.ok());
  CHECK_FALSE(bad.examples.empty());
}

TEST_CASE("ping bound") {
  SECTION("single client is never dropped") {
    PingBoundInput in;
    in.numerators = {20000};
    in.trials = 100000;
    const PingBoundResult r = check_ping_bound(in);
    CHECK(r.report.ok());
    CHECK(std::abs(r.success_rate[0] - 20000.0 / 65536.0) < 0.01);
  }
  SECTION("ten clients at 1/20, capacity one") {
    PingBoundInput in;
    in.numerators.assign(10, 3277);
    in.sigma = 1;
    in.trials = 1'000'000;
    const PingBoundResult r = check_ping_bound(in);
    CHECK(r.report.ok());
    REQUIRE(r.success_rate.size() == 10);
    const auto [lo, hi] = std::minmax_element(r.success_rate.begin(), r.success_rate.end());
    CHECK(*lo >= 1.0 / 40.0);
    // exchangeable clients: estimates agree within a few standard errors
    const double se = std::sqrt(*hi * (1 - *hi) / 1e6);
    CHECK(*hi - *lo < 8 * se);
    for (double b : r.bound) CHECK(b == Catch::Approx(3277.0 / 65536.0 / (4 * 32770.0 / 65536.0)));
  }
  SECTION("preconditions") {
    PingBoundInput in;
    in.numerators.assign(21, 1);
    CHECK_THROWS_AS(check_ping_bound(in), PreconditionViolated);
    in.numerators.assign(2, 65536);
    CHECK_THROWS_AS(check_ping_bound(in), PreconditionViolated);
  }
}

TEST_CASE("full suite") {
  VerifyBounds b;
  b.ping_trials = 20000;
  const auto reports = verify_all(b);
  REQUIRE(reports.size() >= 4);
  for (const Report& r : reports) {
    CHECK(r.ok());
    CHECK(r.cases > 0);
  }
  b.inject_fault = true;
  const auto faulty = verify_all(b);
  CHECK(std::any_of(faulty.begin(), faulty.end(), [](const Report& r) { return !r.ok(); }));
}
