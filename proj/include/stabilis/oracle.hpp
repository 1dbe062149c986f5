#pragma once

// Brute-force checks for the small combinatorial facts the protocol relies
// on. Each check returns a Report; a clean run has zero violations.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stabilis/core.hpp"

namespace stabilis {

struct Report {
  std::string name;
  std::uint64_t cases = 0;
  std::uint64_t violations = 0;
  /// First few offending cases, human readable.
  std::vector<std::string> examples;

  bool ok() const { return violations == 0; }
  void fail(std::string what);
};

/// x^2 + y^2 - (floor(m)^2 + ceil(m)^2) >= ((x-y)^2 - 1)/2 with m = (x+y)/2,
/// for all |x|, |y| <= range.
Report check_helper_square(std::int64_t range);

/// sum_i sum_j (x_i - x_j)^2 == 2 n sum_i x_i^2 for each zero-sum vector.
/// Throws PreconditionViolated on a vector with nonzero sum.
Report check_helper_distance(const std::vector<std::vector<std::int64_t>>& vectors);

/// Every zero-sum integer vector of length 1..max_len with entries in
/// [-bound, bound].
std::vector<std::vector<std::int64_t>> zero_sum_vectors(std::size_t max_len, std::int64_t bound);

using PlacedAverage = std::function<std::vector<Prob>(std::span<const Prob>, std::span<const bool>)>;

/// Every list of 1..k_max numerators in [1, num_max] and every residue
/// placement: sum conserved, spread <= 1 ulp. `average` defaults to
/// average_with_placement.
Report check_average_conservation(std::size_t k_max, std::uint64_t num_max, const PlacedAverage& average = {});

struct PingBoundInput {
  /// Client probabilities as numerators over 2^bits.
  std::vector<std::uint64_t> numerators;
  unsigned bits = 16;
  std::uint32_t sigma = 1;
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 1;
};

struct PingBoundResult {
  Report report;
  std::vector<double> success_rate;
  std::vector<double> bound;
};

/// Monte Carlo estimate of Pr[v survives the drop] using the engine's coin
/// and drop primitives; each estimate plus 4 standard errors must reach
/// p(v) / (4P). Requires P <= n/2 and n <= 20.
PingBoundResult check_ping_bound(const PingBoundInput& in);

/// The full suite at the given bounds, in a fixed order.
struct VerifyBounds {
  std::int64_t square_range = 200;
  std::size_t distance_len = 4;
  std::int64_t distance_bound = 5;
  std::size_t average_k = 4;
  std::uint64_t average_num = 16;
  std::uint64_t ping_trials = 1'000'000;
  std::uint64_t seed = 1;
  /// Run the averaging check against an averager that drops the residue, so
  /// the suite is known to fail.
  bool inject_fault = false;
};

std::vector<Report> verify_all(const VerifyBounds& bounds);

}  // namespace stabilis
