#pragma once

// Client and server transitions for one synchronous round.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "stabilis/core.hpp"
#include "stabilis/estimator.hpp"

namespace stabilis {

struct ClientState {
  ClientId id;
  Prob p{1};
  friend bool operator==(const ClientState&, const ClientState&) = default;
};

enum class Decision { PrecL, Between, SuccR };

/// Pending extremal action recorded when a window closes without enough
/// successful pings to act on.
enum class Flag : std::int8_t { Raise = -1, None = 0, Decrease = 1 };

struct ServerState {
  std::uint64_t X = 0;
  std::uint64_t delta = 0;
  std::uint64_t window = 1;
  Flag flag = Flag::None;
  EstimatorState estimator = FixedState{};
};

/// What the server did with this round's pings.
enum class ServerAction {
  Idle,           // no pings and nothing to decide
  Average,        // averaging branch
  Hold,           // window closed, decision Between
  RaiseMin,       // window closed, v_1 raised to p-hat
  DecreaseMax,    // window closed, v_k decreased
  DeferRaise,     // window closed on PrecL with no ping; flag set
  DeferDecrease,  // window closed on SuccR with k < 2; flag set
  FlagRaise,      // pending raise discharged
  FlagDecrease,   // pending decrease discharged
};

std::string_view to_string(Decision d);
std::string_view to_string(ServerAction a);
std::string_view to_string(Flag f);

/// Coin with success probability numerator / 2^{bW}: the top bW bits of one
/// draw, compared against the numerator.
std::optional<PingMessage> client_step(const ClientState& client, Rng& rng, const Config& cfg);

/// Coin using an already-drawn uniform value u in [0, 2^{bW}).
inline bool coin_shows_heads(std::uint64_t u, Prob p) { return u < p.numerator(); }

ClientState client_apply(const ClientState& client, const ReplyMessage& reply);

Decision approx_decision(std::uint64_t X, std::uint64_t window, const Rational& L, const Rational& R);

struct ServerRoundResult {
  std::vector<ReplyMessage> replies;
  std::optional<Decision> decision;
  ServerAction action = ServerAction::Idle;
};

/// One server round over the post-drop survivors. Mutates `state`.
ServerRoundResult server_round(ServerState& state, std::span<const PingMessage> pings, Rng& rng,
                               const Config& cfg);

}  // namespace stabilis
