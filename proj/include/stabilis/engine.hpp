#pragma once

// Synchronous round loop: coin tosses, capacity-sigma drop, estimator
// maintenance, server computation and reply delivery.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stabilis/core.hpp"
#include "stabilis/estimator.hpp"
#include "stabilis/protocol.hpp"

namespace stabilis {

struct World {
  Config cfg;
  std::vector<ClientState> clients;
  ServerState server;
  std::uint64_t round = 0;
  /// Trial key; every per-round stream is derived from it.
  std::uint64_t key = 0;
  /// Window emitted by the estimator, applied at the start of the next round.
  std::optional<std::uint64_t> pending_window;
  /// Drop every server reply (client probabilities stay frozen).
  bool suppress_replies = false;

  /// Validated world with every client at p-hat, ids 1..n, and a fresh
  /// server whose window is the one its estimator implies (1 if none).
  static World create(const Config& cfg);

  HashFn hash() const { return HashFn{cfg.hash_seed}; }
  ClientId server_id() const { return ClientId{cfg.server_id}; }
};

struct RoundOutcome {
  std::uint64_t round = 0;
  std::vector<ClientId> attempted;
  std::vector<ClientId> survivors;
  std::optional<Decision> decision;
  ServerAction action = ServerAction::Idle;
  std::vector<ReplyMessage> replies;
  /// Window in force during this round.
  std::uint64_t window = 1;
};

/// Indices into `attempted` (size m) of the min(m, sigma) survivors, chosen
/// uniformly without replacement by a partial shuffle.
std::vector<std::size_t> draw_survivors(std::size_t attempted, std::uint32_t sigma, Rng& rng);

RoundOutcome step(World& world);

using StopPredicate = std::function<bool(const World&)>;
using RoundObserver = std::function<void(const World&, const RoundOutcome&)>;

struct RunOptions {
  std::uint64_t max_rounds = 1'000'000;
  /// Keep every m-th outcome in the returned trace; 0 keeps none.
  std::uint64_t thin = 1;
  RoundObserver on_round;
};

struct RunResult {
  std::vector<RoundOutcome> trace;
  std::uint64_t rounds_executed = 0;
  bool stopped = false;
  bool budget_exceeded() const { return !stopped; }
};

/// Steps until `stop` holds (checked before every round, including the
/// first) or max_rounds rounds have run.
RunResult run(World& world, const StopPredicate& stop, const RunOptions& options = {});

}  // namespace stabilis
