#pragma once

// Multi-seed experiments: convergence time, holding time and estimator
// recovery. Trials run concurrently; results come back in seed order and do
// not depend on the number of worker threads.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "stabilis/metrics.hpp"
#include "stabilis/scenarios.hpp"

namespace stabilis {

/// Runs body(i) for i in [0, count) on up to `jobs` threads (0 means the
/// hardware concurrency). The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body);

struct Summary {
  std::size_t count = 0;
  std::size_t censored = 0;
  double mean = 0;
  double median = 0;
  double p95 = 0;
  std::uint64_t max = 0;
};

/// Summary over the given values (censored ones included at their cap).
Summary summarize(const std::vector<std::uint64_t>& values, std::size_t censored);

enum class ConvergenceTarget {
  /// busy, weakly fair and, under Strategy 2, stable.
  Legitimate,
  /// P in [L, R] only.
  Busy,
};

struct ConvergenceTrial {
  std::uint64_t seed = 0;
  /// First round (counted from 0) at which the target holds; the budget when
  /// censored.
  std::uint64_t rounds = 0;
  bool censored = false;
  /// Distinct clients whose probability the server changed before that round.
  std::uint64_t touched = 0;
  /// Minimum numerator in the initial world.
  std::uint64_t initial_p_min = 0;
};

struct ConvergenceReport {
  std::vector<ConvergenceTrial> trials;
  Summary summary;
  /// (1/p_min + n) * log2(n)^2 for the worst initial p_min over the seeds.
  double reference_budget = 0;
};

struct MeasureOptions {
  std::uint64_t max_rounds = 1'000'000;
  unsigned jobs = 1;
  ConvergenceTarget target = ConvergenceTarget::Legitimate;
};

ConvergenceReport measure_convergence(const Config& cfg, const Scenario& scenario,
                                      const std::vector<std::uint64_t>& seeds, const MeasureOptions& options);

struct HoldingTrial {
  std::uint64_t seed = 0;
  /// Rounds during which the state stayed busy and weakly fair.
  std::uint64_t rounds = 0;
  bool censored = false;
};

struct HoldingReport {
  std::vector<HoldingTrial> trials;
  Summary summary;
};

/// Starts each trial from `scenario` (a constructed legitimate state by
/// default) and counts rounds until busy and weakly fair first fails.
HoldingReport measure_holding(const Config& cfg, const std::vector<std::uint64_t>& seeds,
                              const MeasureOptions& options, const Scenario& scenario = {});

/// Counts rounds until `world` leaves the safe set, capped at max_rounds.
HoldingTrial hold_from(World world, std::uint64_t max_rounds);

struct RecoveryTrial {
  std::uint64_t seed = 0;
  std::uint64_t initial_head = 0;
  std::uint64_t final_head = 0;
  /// Rounds until head <= limit: simulated plus fast-forwarded.
  std::uint64_t rounds_to_shrink = 0;
  std::uint64_t simulated_rounds = 0;
  std::uint64_t skipped_rounds = 0;
  /// Sum of deletion thresholds of the columns above the final head.
  std::uint64_t allowed_rounds = 0;
  bool shrunk = false;
  /// Hash distance from the server to its closest client, in 2^-64 units.
  std::uint64_t closest_distance = 0;
  /// Window emitted once every client had a successful ping.
  std::optional<std::uint64_t> delta_after_all_pinged;
};

struct RecoveryOptions {
  std::uint64_t head_limit = 0;
  /// Budget of simulated (not skipped) rounds per trial.
  std::uint64_t max_simulated_rounds = 2'000'000;
  unsigned jobs = 1;
  /// Derive each trial's hash seed from its PRNG seed, so trials differ in
  /// hash geometry and not only in coin flips.
  bool hash_per_seed = false;
};

/// Corrupted-table recovery under Strategy 2.
///
/// Columns that no client can reset (every client farther than 1/c_i from
/// the server in hash space) only age, so the rounds until the first of them
/// expires are skipped in one jump with the rest of the world held still.
/// Everything else is simulated round by round.
RecoveryTrial recover_table(const Config& cfg, std::uint64_t head, const RecoveryOptions& options);

std::vector<RecoveryTrial> measure_recovery(const Config& cfg, std::uint64_t head,
                                            const std::vector<std::uint64_t>& seeds,
                                            const RecoveryOptions& options);

}  // namespace stabilis
