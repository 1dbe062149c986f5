#include "stabilis/engine.hpp"

#include <algorithm>
#include <numeric>

namespace stabilis {

World World::create(const Config& cfg) {
  cfg.validate();
  World w;
  w.cfg = cfg;
  const Prob phat(cfg.phat_numerator());
  w.clients.reserve(cfg.n);
  for (std::uint32_t i = 0; i < cfg.n; ++i) w.clients.push_back(ClientState{ClientId{i + 1ULL}, phat});
  w.server.estimator = initial_estimator(cfg);
  w.server.window = estimator_delta(w.server.estimator, w.server_id(), w.hash(), cfg).value_or(1);
  w.key = mix64(cfg.seed ^ 0x73746162696c6973ULL);
  return w;
}

std::vector<std::size_t> draw_survivors(std::size_t attempted, std::uint32_t sigma, Rng& rng) {
  std::vector<std::size_t> idx(attempted);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (attempted <= sigma) return idx;
  for (std::size_t i = 0; i < sigma; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(attempted - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(sigma);
  return idx;
}

namespace {

// Returns the window the estimator wants in force from the next round on.
std::optional<std::uint64_t> maintain_estimator(World& world, std::span<const PingMessage> survivors) {
  const HashFn h = world.hash();
  const ClientId server = world.server_id();
  const Config& cfg = world.cfg;
  auto& est = world.server.estimator;

  if (auto* s1 = std::get_if<Strategy1State>(&est)) {
    std::optional<std::uint64_t> emitted;
    for (const PingMessage& m : survivors) {
      if (auto r = strategy1_observe(*s1, m.sender, server, h, cfg); r.delta) emitted = r.delta;
    }
    return emitted;
  }
  if (auto* s2 = std::get_if<Strategy2State>(&est)) {
    // Age first, then let this round's pings reset: a column touched in
    // round r shows t = 0 after round r.
    strategy2_tick(s2->table, cfg);
    for (const PingMessage& m : survivors) strategy2_observe(s2->table, m.sender, server, h);
    return strategy2_delta(s2->table, cfg);
  }
  return std::get<FixedState>(est).delta_value;
}

}  // namespace

RoundOutcome step(World& world) {
  const Config& cfg = world.cfg;
  ServerState& server = world.server;

  if (world.pending_window) {
    if (*world.pending_window != server.window) {
      server.window = std::max<std::uint64_t>(1, *world.pending_window);
      server.delta = 0;
      server.X = 0;
    }
    world.pending_window.reset();
  }

  RoundOutcome out;
  out.round = world.round;
  out.window = server.window;

  Rng coins = Rng::stream(world.key, world.round, StreamKind::Coins);
  std::vector<PingMessage> attempts;
  const unsigned bits = cfg.precision_bits();
  for (const ClientState& c : world.clients) {
    if (coin_shows_heads(coins.bits(bits), c.p)) attempts.push_back(PingMessage{c.id, c.p});
  }
  out.attempted.reserve(attempts.size());
  for (const auto& m : attempts) out.attempted.push_back(m.sender);

  std::vector<PingMessage> survivors;
  if (attempts.size() > cfg.sigma) {
    Rng drop = Rng::stream(world.key, world.round, StreamKind::Drop);
    for (std::size_t i : draw_survivors(attempts.size(), cfg.sigma, drop)) survivors.push_back(attempts[i]);
    std::sort(survivors.begin(), survivors.end(),
              [](const PingMessage& a, const PingMessage& b) { return a.sender < b.sender; });
  } else {
    survivors = std::move(attempts);
  }
  out.survivors.reserve(survivors.size());
  for (const auto& m : survivors) out.survivors.push_back(m.sender);

  world.pending_window = maintain_estimator(world, survivors);

  Rng residue = Rng::stream(world.key, world.round, StreamKind::Residue);
  ServerRoundResult res = server_round(server, survivors, residue, cfg);
  out.decision = res.decision;
  out.action = res.action;
  out.replies = std::move(res.replies);

  if (!world.suppress_replies) {
    for (const ReplyMessage& reply : out.replies) {
      // Client ids are 1..n by construction.
      ClientState& c = world.clients.at(reply.target.value - 1);
      c = client_apply(c, reply);
    }
  }
  ++world.round;
  return out;
}

RunResult run(World& world, const StopPredicate& stop, const RunOptions& options) {
  RunResult result;
  while (true) {
    if (stop && stop(world)) {
      result.stopped = true;
      break;
    }
    if (result.rounds_executed >= options.max_rounds) break;
    RoundOutcome outcome = step(world);
    ++result.rounds_executed;
    if (options.on_round) options.on_round(world, outcome);
    if (options.thin != 0 && outcome.round % options.thin == 0) result.trace.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace stabilis
