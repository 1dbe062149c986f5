#pragma once

// Initial-state generators: arbitrary (corrupted) worlds, extreme P, a
// corrupted estimator table, and a constructed legitimate state.

#include <cstdint>
#include <string>
#include <string_view>

#include "stabilis/engine.hpp"

namespace stabilis {

World gen_arbitrary(const Config& cfg, Rng& rng);
/// All clients at `target` (so P = n * target); server variables arbitrary.
World gen_low_P(const Config& cfg, Prob target, Rng& rng);
/// Strategy 2 table with the full chain below `head`, timestamps uniform in
/// [0, deletion threshold]; clients at the legitimate midpoint.
World gen_corrupt_table(const Config& cfg, std::uint64_t head, Rng& rng);
/// Equal probabilities summing to the midpoint of [L+eps, R-eps] on the grid,
/// analytic window, stable table. Throws Infeasible if the result is not
/// busy, weakly fair and (Strategy 2) stable.
World gen_legitimate(const Config& cfg, Rng& rng);

enum class ScenarioKind { Arbitrary, LowP, HighP, CorruptTable, Legitimate };

struct Scenario {
  ScenarioKind kind = ScenarioKind::Legitimate;
  /// LowP: target numerator (default 1 ulp).
  std::uint64_t target_numerator = 1;
  /// CorruptTable: head value; 0 means n^4.
  std::uint64_t head = 0;

  std::string name() const;
  /// "arbitrary", "low_p", "low_p:<num>", "high_p", "corrupt_table",
  /// "corrupt_table:<head>", "legitimate".
  static Scenario parse(std::string_view text);
};

/// Builds the scenario's world for cfg.seed, using the seed's Setup stream.
World make_world(const Config& cfg, const Scenario& scenario);

/// Numerators summing to `total`, all within one ulp of each other, the
/// larger ones placed first.
std::vector<std::uint64_t> spread_evenly(std::uint64_t total, std::size_t n);

}  // namespace stabilis
