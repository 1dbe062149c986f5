#pragma once

// Server-side estimation of Theta(log n) from hashed client identifiers.
//
// Hash values and distances are 64-bit fixed-point fractions of [0, 1): the
// integer x stands for x / 2^64. Distances are linear, |h(a) - h(b)|.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "stabilis/core.hpp"

namespace stabilis {

struct HashFn {
  std::uint64_t seed = 0;
  std::uint64_t operator()(ClientId id) const;
};

std::uint64_t hash_to_unit(const HashFn& h, ClientId id);
std::uint64_t unit_distance(std::uint64_t a, std::uint64_t b);

struct Column {
  std::uint64_t c = 2;
  std::uint64_t t = 0;
  friend bool operator==(const Column&, const Column&) = default;
};

/// Square-root column chain c_0 > c_1 > ... > 2, each with its timestamp.
/// Column values saturate at 2^64 - 1 when squared.
class EstimatorTable {
 public:
  EstimatorTable() : columns_{Column{}} {}
  explicit EstimatorTable(std::vector<Column> columns);

  /// Full chain below `head` with all timestamps zero. head >= 2.
  static EstimatorTable from_head(std::uint64_t head);

  const std::vector<Column>& columns() const { return columns_; }
  std::vector<Column>& mutable_columns() { return columns_; }
  std::uint64_t head() const { return columns_.front().c; }
  std::size_t size() const { return columns_.size(); }

  /// c_{i+1} = ceil(sqrt(c_i)) for all i and the tail is 2.
  bool well_formed() const;
  bool all_timestamps_zero() const;

  friend bool operator==(const EstimatorTable&, const EstimatorTable&) = default;

 private:
  std::vector<Column> columns_;
};

struct Strategy1State {
  std::optional<ClientId> vhat;
  friend bool operator==(const Strategy1State&, const Strategy1State&) = default;
};
struct Strategy2State {
  EstimatorTable table;
  friend bool operator==(const Strategy2State&, const Strategy2State&) = default;
};
struct FixedState {
  std::uint64_t delta_value = 1;
  friend bool operator==(const FixedState&, const FixedState&) = default;
};
using EstimatorState = std::variant<Strategy1State, Strategy2State, FixedState>;

enum class ObserveStatus { Updated, Unchanged, DegenerateDistance };

struct Strategy1Outcome {
  ObserveStatus status = ObserveStatus::Unchanged;
  std::optional<std::uint64_t> delta;
};

/// Keeps the client closest to the server in hash space; emits a new window
/// whenever the minimizer strictly improves.
Strategy1Outcome strategy1_observe(Strategy1State& state, ClientId sender, ClientId server,
                                   const HashFn& h, const Config& cfg);

/// Window for an observed minimum distance (units of 2^-64, > 0).
std::uint64_t strategy1_delta(std::uint64_t distance, const Config& cfg);

void strategy2_observe(EstimatorTable& table, ClientId sender, ClientId server, const HashFn& h);
/// Same as strategy2_observe for an already-computed distance.
void strategy2_observe_distance(EstimatorTable& table, std::uint64_t distance);

/// Age every timestamp by one round, delete expired prefixes, return the
/// window for the resulting head.
std::uint64_t strategy2_tick(EstimatorTable& table, const Config& cfg);
std::uint64_t strategy2_delta(const EstimatorTable& table, const Config& cfg);

/// t_i may reach this value; one more round without a reset deletes c_0..c_i.
std::uint64_t deletion_threshold(std::uint64_t c, const Rational& frakc);

std::uint64_t table_memory_bits(const EstimatorTable& table, const Rational& frakc);

EstimatorState initial_estimator(const Config& cfg);

/// Window implied by the estimator state, if it implies one (Strategy 1
/// without a stored identifier does not).
std::optional<std::uint64_t> estimator_delta(const EstimatorState& state, ClientId server,
                                             const HashFn& h, const Config& cfg);

}  // namespace stabilis
