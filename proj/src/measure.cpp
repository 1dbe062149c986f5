#include "stabilis/measure.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace stabilis {

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body) {
  if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

Summary summarize(const std::vector<std::uint64_t>& values, std::size_t censored) {
  Summary s;
  s.count = values.size();
  s.censored = censored;
  if (values.empty()) return s;
  std::vector<std::uint64_t> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  long double total = 0;
  for (std::uint64_t v : sorted) total += static_cast<long double>(v);
  s.mean = static_cast<double>(total / static_cast<long double>(sorted.size()));
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? static_cast<double>(sorted[mid])
                                     : (static_cast<double>(sorted[mid - 1]) + static_cast<double>(sorted[mid])) / 2.0;
  // Nearest-rank 95th percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  s.p95 = static_cast<double>(sorted[std::max<std::size_t>(rank, 1) - 1]);
  s.max = sorted.back();
  return s;
}

namespace {

Config with_seed(const Config& cfg, std::uint64_t seed) {
  Config c = cfg;
  c.seed = seed;
  return c;
}

// Distinct clients whose probability a reply actually changed.
class TouchTracker {
 public:
  explicit TouchTracker(const World& world) : touched_(world.clients.size(), false) {
    shadow_.reserve(world.clients.size());
    for (const ClientState& c : world.clients) shadow_.push_back(c.p.numerator());
  }

  void observe(const RoundOutcome& outcome) {
    for (const ReplyMessage& r : outcome.replies) {
      const std::size_t i = r.target.value - 1;
      if (shadow_[i] != r.new_prob.numerator()) {
        if (!touched_[i]) ++count_;
        touched_[i] = true;
        shadow_[i] = r.new_prob.numerator();
      }
    }
  }

  std::uint64_t count() const { return count_; }

 private:
  std::vector<std::uint64_t> shadow_;
  std::vector<bool> touched_;
  std::uint64_t count_ = 0;
};

}  // namespace

ConvergenceReport measure_convergence(const Config& cfg, const Scenario& scenario,
                                      const std::vector<std::uint64_t>& seeds, const MeasureOptions& options) {
  ConvergenceReport report;
  report.trials.resize(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t i) {
    World world = make_world(with_seed(cfg, seeds[i]), scenario);
    ConvergenceTrial& trial = report.trials[i];
    trial.seed = seeds[i];
    trial.initial_p_min = min_numerator(world);
    TouchTracker touch(world);
    StopPredicate stop = options.target == ConvergenceTarget::Busy
                             ? StopPredicate([](const World& w) { return is_busy(w); })
                             : StopPredicate([](const World& w) { return is_legitimate(w); });
    RunOptions ro;
    ro.max_rounds = options.max_rounds;
    ro.thin = 0;
    ro.on_round = [&](const World&, const RoundOutcome& o) { touch.observe(o); };
    const RunResult res = run(world, stop, ro);
    trial.rounds = res.rounds_executed;
    trial.censored = res.budget_exceeded();
    trial.touched = touch.count();
  });

  std::vector<std::uint64_t> values;
  std::size_t censored = 0;
  std::uint64_t worst_p_min = 0;
  for (const ConvergenceTrial& t : report.trials) {
    values.push_back(t.rounds);
    censored += t.censored ? 1 : 0;
    worst_p_min = worst_p_min == 0 ? t.initial_p_min : std::min(worst_p_min, t.initial_p_min);
  }
  report.summary = summarize(values, censored);
  if (!report.trials.empty()) {
    const double n = cfg.n;
    const double inv_p_min = static_cast<double>(cfg.one()) / static_cast<double>(worst_p_min);
    const double lg = std::log2(std::max(n, 2.0));
    report.reference_budget = (inv_p_min + n) * lg * lg;
  }
  return report;
}

HoldingTrial hold_from(World world, std::uint64_t max_rounds) {
  HoldingTrial trial;
  trial.seed = world.cfg.seed;
  RunOptions ro;
  ro.max_rounds = max_rounds;
  ro.thin = 0;
  const RunResult res = run(world, [](const World& w) { return !is_safe(w); }, ro);
  trial.rounds = res.rounds_executed;
  trial.censored = res.budget_exceeded();
  return trial;
}

HoldingReport measure_holding(const Config& cfg, const std::vector<std::uint64_t>& seeds,
                              const MeasureOptions& options, const Scenario& scenario) {
  HoldingReport report;
  report.trials.resize(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t i) {
    report.trials[i] = hold_from(make_world(with_seed(cfg, seeds[i]), scenario), options.max_rounds);
  });
  std::vector<std::uint64_t> values;
  std::size_t censored = 0;
  for (const HoldingTrial& t : report.trials) {
    values.push_back(t.rounds);
    censored += t.censored ? 1 : 0;
  }
  report.summary = summarize(values, censored);
  return report;
}

RecoveryTrial recover_table(const Config& cfg, std::uint64_t head, const RecoveryOptions& options) {
  Config c = cfg;
  c.strategy = StrategyKind::Strategy2;
  if (options.hash_per_seed) c.hash_seed = mix64(c.seed ^ cfg.hash_seed);
  Scenario scenario;
  scenario.kind = ScenarioKind::CorruptTable;
  scenario.head = head;
  World world = make_world(c, scenario);

  RecoveryTrial trial;
  trial.seed = c.seed;
  trial.initial_head = head;
  const std::uint64_t limit =
      options.head_limit != 0 ? options.head_limit : static_cast<std::uint64_t>(c.n) * c.n;
  const std::vector<Column> initial_columns = std::get<Strategy2State>(world.server.estimator).table.columns();

  // Hash distances never change, so the closest client bounds which columns
  // can ever be reset.
  const HashFn h = world.hash();
  const std::uint64_t server_hash = h(world.server_id());
  std::uint64_t d_min = ~std::uint64_t{0};
  for (const ClientState& cl : world.clients) {
    d_min = std::min(d_min, std::max<std::uint64_t>(1, unit_distance(server_hash, h(cl.id))));
  }
  trial.closest_distance = d_min;
  const u128 unit = static_cast<u128>(1) << 64;

  std::vector<bool> pinged(world.clients.size(), false);
  std::size_t remaining = world.clients.size();

  while (true) {
    EstimatorTable& table = std::get<Strategy2State>(world.server.estimator).table;
    if (!trial.shrunk && table.head() <= limit) {
      trial.shrunk = true;
      trial.final_head = table.head();
      trial.rounds_to_shrink = trial.simulated_rounds + trial.skipped_rounds;
    }
    if (trial.shrunk && remaining == 0) {
      trial.delta_after_all_pinged = strategy2_delta(table, c);
      break;
    }
    if (trial.simulated_rounds >= options.max_simulated_rounds) break;

    if (!trial.shrunk) {
      // Leading columns with 1/c_i < d_min can only age.
      std::uint64_t jump = ~std::uint64_t{0};
      std::size_t unreachable = 0;
      for (const Column& col : table.columns()) {
        if (static_cast<u128>(d_min) * col.c <= unit) break;
        ++unreachable;
        const std::uint64_t thr = deletion_threshold(col.c, c.frakc);
        jump = std::min(jump, thr - std::min(thr, col.t));
      }
      if (unreachable > 0 && jump > 0) {
        for (std::size_t i = 0; i < unreachable; ++i) table.mutable_columns()[i].t += jump;
        world.server.delta = (world.server.delta + jump) % world.server.window;
        world.round += jump;
        trial.skipped_rounds += jump;
      }
    }

    const RoundOutcome out = step(world);
    ++trial.simulated_rounds;
    for (ClientId id : out.survivors) {
      if (!pinged[id.value - 1]) {
        pinged[id.value - 1] = true;
        --remaining;
      }
    }
  }

  if (trial.shrunk) {
    for (const Column& col : initial_columns) {
      if (col.c > trial.final_head) trial.allowed_rounds += deletion_threshold(col.c, c.frakc);
    }
  } else {
    trial.final_head = std::get<Strategy2State>(world.server.estimator).table.head();
  }
  return trial;
}

std::vector<RecoveryTrial> measure_recovery(const Config& cfg, std::uint64_t head,
                                            const std::vector<std::uint64_t>& seeds,
                                            const RecoveryOptions& options) {
  std::vector<RecoveryTrial> out(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t i) { out[i] = recover_table(with_seed(cfg, seeds[i]), head, options); });
  return out;
}

}  // namespace stabilis
