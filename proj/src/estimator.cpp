#include "stabilis/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace stabilis {

namespace {

constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
constexpr u128 kUnit = u128{1} << 64;

std::uint64_t saturating_square(std::uint64_t c) {
  const u128 sq = static_cast<u128>(c) * c;
  return sq > kMax ? kMax : static_cast<std::uint64_t>(sq);
}

// d <= 1/c with d in units of 2^-64.
bool within(std::uint64_t d, std::uint64_t c) { return static_cast<u128>(d) * c <= kUnit; }

// d <= 1/c^2.
bool within_squared(std::uint64_t d, std::uint64_t c) {
  if (c > (std::uint64_t{1} << 32)) return false;
  return static_cast<u128>(d) * (static_cast<u128>(c) * c) <= kUnit;
}

}  // namespace

std::uint64_t HashFn::operator()(ClientId id) const {
  return mix64(mix64(id.value ^ mix64(seed)) + seed * Rng::kGamma);
}

std::uint64_t hash_to_unit(const HashFn& h, ClientId id) { return h(id); }

std::uint64_t unit_distance(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : b - a; }

EstimatorTable::EstimatorTable(std::vector<Column> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) columns_.push_back(Column{});
}

EstimatorTable EstimatorTable::from_head(std::uint64_t head) {
  if (head < 2) throw PreconditionViolated("table head must be at least 2");
  std::vector<Column> cols;
  std::uint64_t c = head;
  while (true) {
    cols.push_back(Column{c, 0});
    if (c == 2) break;
    c = ceil_sqrt(c);
  }
  return EstimatorTable(std::move(cols));
}

bool EstimatorTable::well_formed() const {
  if (columns_.empty() || columns_.back().c != 2) return false;
  for (std::size_t i = 0; i + 1 < columns_.size(); ++i) {
    if (columns_[i + 1].c != ceil_sqrt(columns_[i].c) || columns_[i].c <= 2) return false;
  }
  return true;
}

bool EstimatorTable::all_timestamps_zero() const {
  return std::all_of(columns_.begin(), columns_.end(), [](const Column& col) { return col.t == 0; });
}

std::uint64_t strategy1_delta(std::uint64_t distance, const Config& cfg) {
  if (cfg.delta_formula == DeltaFormula::Analytic) {
    const long double neg_log = std::has_single_bit(distance)
                                    ? 64.0L - std::countr_zero(distance)
                                    : 64.0L - std::log2(static_cast<long double>(distance));
    return delta_analytic_log2(neg_log, cfg);
  }
  const Rational& scale = cfg.c_delta;
  if (std::has_single_bit(distance)) {
    const i128 l = 64 - std::countr_zero(distance);
    const i128 num = l * scale.num();
    const i128 v = (num + scale.den() - 1) / scale.den();
    return static_cast<std::uint64_t>(std::max<i128>(1, v));
  }
  const long double neg_log = 64.0L - std::log2(static_cast<long double>(distance));
  const long double v = std::ceil(neg_log * scale.num() / scale.den());
  return v < 1 ? 1 : static_cast<std::uint64_t>(v);
}

Strategy1Outcome strategy1_observe(Strategy1State& state, ClientId sender, ClientId server,
                                   const HashFn& h, const Config& cfg) {
  const std::uint64_t hs = h(server);
  const std::uint64_t d = unit_distance(hs, h(sender));
  if (d == 0) return {ObserveStatus::DegenerateDistance, std::nullopt};
  if (state.vhat) {
    const std::uint64_t current = unit_distance(hs, h(*state.vhat));
    if (current != 0 && d >= current) return {ObserveStatus::Unchanged, std::nullopt};
  }
  state.vhat = sender;
  return {ObserveStatus::Updated, strategy1_delta(d, cfg)};
}

void strategy2_observe_distance(EstimatorTable& table, std::uint64_t d) {
  if (d == 0) d = 1;
  auto& cols = table.mutable_columns();
  // Thresholds 1/c_i grow with i, so the reset set is a suffix.
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (within(d, cols[i].c)) {
      for (std::size_t j = i; j < cols.size(); ++j) cols[j].t = 0;
      break;
    }
  }
  while (within_squared(d, cols.front().c)) {
    cols.insert(cols.begin(), Column{saturating_square(cols.front().c), 0});
  }
}

void strategy2_observe(EstimatorTable& table, ClientId sender, ClientId server, const HashFn& h) {
  strategy2_observe_distance(table, unit_distance(h(server), h(sender)));
}

std::uint64_t deletion_threshold(std::uint64_t c, const Rational& frakc) {
  const u128 base = static_cast<u128>(c) * polylog(c);
  // ceil(frakc * base); frakc is bounded by 2^20 in both parts.
  const u128 num = base * static_cast<u128>(frakc.num());
  const u128 v = (num + static_cast<u128>(frakc.den()) - 1) / static_cast<u128>(frakc.den());
  return v > kMax ? kMax : static_cast<std::uint64_t>(v);
}

std::uint64_t strategy2_delta(const EstimatorTable& table, const Config& cfg) {
  const std::uint64_t c0 = table.head();
  if (cfg.delta_formula == DeltaFormula::Analytic) return delta_analytic(c0, cfg);
  const Rational& scale = cfg.c_delta;
  long double l = std::has_single_bit(c0) ? std::countr_zero(c0) : std::log2(static_cast<long double>(c0));
  if (l == std::floor(l)) {
    const i128 num = static_cast<i128>(l) * scale.num();
    const i128 v = (num + scale.den() - 1) / scale.den();
    return static_cast<std::uint64_t>(std::max<i128>(1, v));
  }
  const long double v = std::ceil(l * scale.num() / scale.den());
  return v < 1 ? 1 : static_cast<std::uint64_t>(v);
}

std::uint64_t strategy2_tick(EstimatorTable& table, const Config& cfg) {
  auto& cols = table.mutable_columns();
  std::optional<std::size_t> expired;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].t < kMax) ++cols[i].t;
    if (cols[i].t > deletion_threshold(cols[i].c, cfg.frakc)) expired = i;
  }
  if (expired) {
    if (*expired + 1 >= cols.size()) {
      cols.assign(1, Column{2, 0});
    } else {
      cols.erase(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(*expired + 1));
    }
  }
  return strategy2_delta(table, cfg);
}

std::uint64_t table_memory_bits(const EstimatorTable& table, const Rational& frakc) {
  std::uint64_t bits = 0;
  for (const Column& col : table.columns()) {
    bits += std::bit_width(col.c);
    const std::uint64_t thr = deletion_threshold(col.c, frakc);
    bits += thr == kMax ? 64 : std::bit_width(thr + 1);
  }
  return bits;
}

EstimatorState initial_estimator(const Config& cfg) {
  switch (cfg.strategy) {
    case StrategyKind::Strategy1: return Strategy1State{};
    case StrategyKind::Strategy2: return Strategy2State{};
    case StrategyKind::Fixed:
      return FixedState{cfg.fixed_delta != 0 ? cfg.fixed_delta : delta_analytic(cfg.n, cfg)};
  }
  return FixedState{};
}

std::optional<std::uint64_t> estimator_delta(const EstimatorState& state, ClientId server,
                                             const HashFn& h, const Config& cfg) {
  if (const auto* s1 = std::get_if<Strategy1State>(&state)) {
    if (!s1->vhat) return std::nullopt;
    const std::uint64_t d = unit_distance(h(server), h(*s1->vhat));
    if (d == 0) return std::nullopt;
    return strategy1_delta(d, cfg);
  }
  if (const auto* s2 = std::get_if<Strategy2State>(&state)) return strategy2_delta(s2->table, cfg);
  return std::get<FixedState>(state).delta_value;
}

}  // namespace stabilis
