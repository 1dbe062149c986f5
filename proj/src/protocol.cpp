#include "stabilis/protocol.hpp"

#include <algorithm>

namespace stabilis {

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::PrecL: return "prec_l";
    case Decision::Between: return "between";
    case Decision::SuccR: return "succ_r";
  }
  return "?";
}

std::string_view to_string(ServerAction a) {
  switch (a) {
    case ServerAction::Idle: return "idle";
    case ServerAction::Average: return "average";
    case ServerAction::Hold: return "hold";
    case ServerAction::RaiseMin: return "raise_min";
    case ServerAction::DecreaseMax: return "decrease_max";
    case ServerAction::DeferRaise: return "defer_raise";
    case ServerAction::DeferDecrease: return "defer_decrease";
    case ServerAction::FlagRaise: return "flag_raise";
    case ServerAction::FlagDecrease: return "flag_decrease";
  }
  return "?";
}

std::string_view to_string(Flag f) {
  switch (f) {
    case Flag::Raise: return "-1";
    case Flag::None: return "0";
    case Flag::Decrease: return "1";
  }
  return "?";
}

std::optional<PingMessage> client_step(const ClientState& client, Rng& rng, const Config& cfg) {
  if (coin_shows_heads(rng.bits(cfg.precision_bits()), client.p)) return PingMessage{client.id, client.p};
  return std::nullopt;
}

ClientState client_apply(const ClientState& client, const ReplyMessage& reply) {
  if (reply.target != client.id) {
    throw TargetMismatch("reply for client " + std::to_string(reply.target.value) + " delivered to client " +
                         std::to_string(client.id.value));
  }
  ClientState next = client;
  next.p = reply.new_prob;
  return next;
}

Decision approx_decision(std::uint64_t X, std::uint64_t window, const Rational& L, const Rational& R) {
  if (window == 0) throw PreconditionViolated("window must be at least 1");
  // X/window < L  <=>  X * L.den < L.num * window (denominators are positive).
  const i128 x = X;
  const i128 w = window;
  if (x * L.den() < static_cast<i128>(L.num()) * w) return Decision::PrecL;
  if (x * R.den() > static_cast<i128>(R.num()) * w) return Decision::SuccR;
  return Decision::Between;
}

namespace {

std::uint64_t current_head(const ServerState& state) {
  if (const auto* s2 = std::get_if<Strategy2State>(&state.estimator)) return s2->table.head();
  return 2;
}

}  // namespace

ServerRoundResult server_round(ServerState& state, std::span<const PingMessage> pings, Rng& rng,
                               const Config& cfg) {
  const std::size_t k = pings.size();
  if (k > cfg.sigma) {
    throw CapacityViolation(std::to_string(k) + " pings reached a server of capacity " + std::to_string(cfg.sigma));
  }
  if (state.window == 0) state.window = 1;

  std::vector<PingMessage> sorted(pings.begin(), pings.end());
  std::sort(sorted.begin(), sorted.end(), [](const PingMessage& a, const PingMessage& b) {
    if (a.prob != b.prob) return a.prob < b.prob;
    return a.sender < b.sender;
  });

  const Prob phat(cfg.phat_numerator());
  const std::uint64_t c0 = current_head(state);
  ServerRoundResult out;
  auto send = [&](ClientId to, Prob p) { out.replies.push_back({to, apply_visibility_floor(p, c0, cfg)}); };
  auto raise_min = [&]() { send(sorted.front().sender, phat); };
  auto decrease_max = [&]() { send(sorted.back().sender, decrease(sorted.back().prob, cfg.sigma)); };

  state.X += k;
  state.delta = (state.delta + 1) % state.window;

  if (state.delta == 0) {
    const Decision d = approx_decision(state.X, state.window, cfg.L, cfg.R);
    out.decision = d;
    switch (d) {
      case Decision::PrecL:
        if (k >= 1) {
          raise_min();
          state.flag = Flag::None;
          out.action = ServerAction::RaiseMin;
        } else {
          state.flag = Flag::Raise;
          out.action = ServerAction::DeferRaise;
        }
        break;
      case Decision::SuccR:
        if (k >= 2) {
          decrease_max();
          state.flag = Flag::None;
          out.action = ServerAction::DecreaseMax;
        } else {
          state.flag = Flag::Decrease;
          out.action = ServerAction::DeferDecrease;
        }
        break;
      case Decision::Between:
        state.flag = Flag::None;
        out.action = ServerAction::Hold;
        break;
    }
    state.X = 0;
    return out;
  }

  if (state.flag == Flag::Raise && k >= 1) {
    raise_min();
    state.flag = Flag::None;
    out.action = ServerAction::FlagRaise;
    return out;
  }
  if (state.flag == Flag::Decrease && k >= 2) {
    decrease_max();
    state.flag = Flag::None;
    out.action = ServerAction::FlagDecrease;
    return out;
  }
  if (k == 0) return out;

  std::vector<Prob> probs;
  probs.reserve(k);
  for (const PingMessage& m : sorted) probs.push_back(m.prob);
  const std::vector<Prob> averaged = average_with_residue(probs, rng);
  for (std::size_t i = 0; i < k; ++i) send(sorted[i].sender, averaged[i]);
  out.action = ServerAction::Average;
  return out;
}

}  // namespace stabilis
