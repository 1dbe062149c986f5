#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "config_file.hpp"
#include "stabilis/measure.hpp"
#include "stabilis/metrics.hpp"
#include "stabilis/oracle.hpp"

namespace stabilis::cli {

namespace {

using Json = nlohmann::ordered_json;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out_dir = ".";
  std::optional<std::uint64_t> max_rounds;
  std::optional<std::string> scenario;
  std::optional<std::string> strategy;
  std::optional<std::string> format;
};

void add_common(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("--config", o.config_path, "experiment config file");
  cmd.add_option("--seed", o.seed, "PRNG seed (falls back to the config, then STABILIS_SEED)");
  cmd.add_option("--jobs", o.jobs, "worker threads for independent trials (0 = all cores)");
  cmd.add_option("--out-dir", o.out_dir, "directory for output files");
  cmd.add_option("--max-rounds", o.max_rounds, "round budget per trial");
  cmd.add_option("--scenario", o.scenario, "initial state: arbitrary, low_p[:num], high_p, corrupt_table[:head], legitimate");
  cmd.add_option("--strategy", o.strategy, "estimator: fixed, strategy1, strategy2");
  cmd.add_option("--format", o.format, "trace format: jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
}

std::uint64_t env_seed() {
  const char* v = std::getenv("STABILIS_SEED");
  if (v == nullptr || *v == '\0') return 1;
  std::uint64_t seed = 0;
  const std::string_view s(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("STABILIS_SEED is not a non-negative integer: '" + std::string(s) + "'");
  }
  return seed;
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config_file(o.config_path);
  if (o.seed) {
    cfg.protocol.seed = *o.seed;
    cfg.sweep.seeds = {*o.seed};
  } else if (!cfg.seed_given) {
    cfg.protocol.seed = env_seed();
  }
  if (o.max_rounds) cfg.run.max_rounds = *o.max_rounds;
  if (o.scenario) {
    cfg.run.scenario = Scenario::parse(*o.scenario);
    cfg.sweep.scenarios = {cfg.run.scenario};
  }
  if (o.strategy) cfg.protocol.strategy = parse_strategy(*o.strategy);
  if (o.format) cfg.run.format = parse_format(*o.format);
  const std::string origin = o.config_path.empty() ? "<defaults>" : o.config_path;
  try {
    cfg.protocol.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

std::filesystem::path prepare_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  return std::filesystem::path(dir) / name;
}

std::string decision_str(const std::optional<Decision>& d) { return d ? std::string(to_string(*d)) : ""; }

Json config_json(const Config& c) {
  Json j;
  j["n"] = c.n;
  j["sigma"] = c.sigma;
  j["L"] = c.L.str();
  j["R"] = c.R.str();
  j["epsilon"] = c.epsilon.str();
  j["phat"] = c.phat.str();
  j["W"] = c.W;
  j["b"] = c.b;
  j["frakc"] = c.frakc.str();
  j["strategy"] = std::string(to_string(c.strategy));
  j["fixed_delta"] = c.fixed_delta;
  j["delta_formula"] = c.delta_formula == DeltaFormula::Raw ? "raw" : "analytic";
  j["c_delta"] = c.c_delta.str();
  j["visibility_floor"] = c.visibility_floor_enabled;
  j["seed"] = c.seed;
  j["hash_seed"] = c.hash_seed;
  j["server_id"] = c.server_id;
  j["fairness_c"] = c.fairness_c;
  j["weak_beta"] = c.weak_beta.str();
  j["mu"] = c.mu ? Json(c.mu->str()) : Json(nullptr);
  return j;
}

void put_snapshot(Json& j, const MetricsSnapshot& s) {
  j["P"] = exact_str(s.P);
  j["P_float"] = exact_to_double(s.P);
  j["p_min"] = s.p_min;
  j["phi_sq"] = exact_str(s.phi_sq);
  j["phi_minmax"] = exact_str(s.phi_minmax);
  j["phi_mu"] = exact_str(s.phi_mu);
  j["busy"] = s.busy;
  j["fair"] = s.fair;
  j["weakly_fair"] = s.weakly_fair;
  j["stable"] = s.stable ? Json(*s.stable) : Json(nullptr);
  j["rounds_since_all_zero"] = s.rounds_since_all_zero ? Json(*s.rounds_since_all_zero) : Json(nullptr);
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

class TraceWriter {
 public:
  TraceWriter(std::ostream& os, OutputFormat format) : os_(os), format_(format) {}

  void header(const Json& meta) {
    if (format_ == OutputFormat::Jsonl) {
      os_ << meta.dump() << '\n';
      return;
    }
    os_ << "#schema=" << kTraceSchema << '\n';
    os_ << "type,round,window,attempted,survivors,decision,action,replies,P,P_float,p_min,phi_sq,phi_minmax,"
           "phi_mu,busy,fair,weakly_fair,stable,rounds_since_all_zero\n";
  }

  void row(const char* type, const RoundOutcome* o, const MetricsSnapshot& s) {
    if (format_ == OutputFormat::Jsonl) {
      Json j;
      j["type"] = type;
      j["round"] = o ? Json(o->round) : Json(nullptr);
      if (o != nullptr) {
        j["window"] = o->window;
        j["attempted"] = o->attempted.size();
        Json surv = Json::array();
        for (ClientId id : o->survivors) surv.push_back(id.value);
        j["survivors"] = surv;
        j["decision"] = o->decision ? Json(std::string(to_string(*o->decision))) : Json(nullptr);
        j["action"] = std::string(to_string(o->action));
        Json rep = Json::array();
        for (const ReplyMessage& r : o->replies) rep.push_back(Json::array({r.target.value, r.new_prob.numerator()}));
        j["replies"] = rep;
      }
      put_snapshot(j, s);
      os_ << j.dump() << '\n';
      return;
    }
    std::ostringstream line;
    line << type << ',';
    if (o != nullptr) {
      line << o->round << ',' << o->window << ',' << o->attempted.size() << ',';
      for (std::size_t i = 0; i < o->survivors.size(); ++i) line << (i ? " " : "") << o->survivors[i].value;
      line << ',' << decision_str(o->decision) << ',' << to_string(o->action) << ',';
      for (std::size_t i = 0; i < o->replies.size(); ++i) {
        line << (i ? " " : "") << o->replies[i].target.value << ':' << o->replies[i].new_prob.numerator();
      }
    } else {
      line << ",,,,,,";
    }
    line << ',' << exact_str(s.P) << ',' << Json(exact_to_double(s.P)).dump() << ',' << s.p_min << ','
         << exact_str(s.phi_sq) << ',' << exact_str(s.phi_minmax) << ',' << exact_str(s.phi_mu) << ','
         << bool_str(s.busy) << ',' << bool_str(s.fair) << ',' << bool_str(s.weakly_fair) << ','
         << (s.stable ? bool_str(*s.stable) : "") << ','
         << (s.rounds_since_all_zero ? std::to_string(*s.rounds_since_all_zero) : "");
    os_ << line.str() << '\n';
  }

  void footer(const Json& end) {
    if (format_ == OutputFormat::Jsonl) {
      os_ << end.dump() << '\n';
    } else {
      os_ << "#end rounds=" << end["rounds"].get<std::uint64_t>() << " stopped=" << bool_str(end["stopped"].get<bool>())
          << '\n';
    }
  }

 private:
  std::ostream& os_;
  OutputFormat format_;
};

StopPredicate stop_predicate(StopRule rule) {
  switch (rule) {
    case StopRule::Legitimate: return [](const World& w) { return is_legitimate(w); };
    case StopRule::Busy: return [](const World& w) { return is_busy(w); };
    case StopRule::None: return {};
  }
  return {};
}

int cmd_run(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  World world = make_world(cfg.protocol, cfg.run.scenario);
  world.suppress_replies = cfg.run.suppress_replies;

  const auto path =
      prepare_out(o.out_dir, cfg.run.format == OutputFormat::Jsonl ? "trace.jsonl" : "trace.csv");
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError(path.string() + ": cannot open for writing");
  TraceWriter writer(file, cfg.run.format);

  Json meta;
  meta["type"] = "header";
  meta["schema"] = kTraceSchema;
  meta["command"] = "run";
  meta["scenario"] = cfg.run.scenario.name();
  meta["stop"] = std::string(to_string(cfg.run.stop));
  meta["max_rounds"] = cfg.run.max_rounds;
  meta["thin"] = cfg.run.thin;
  meta["suppress_replies"] = cfg.run.suppress_replies;
  meta["config"] = config_json(cfg.protocol);
  writer.header(meta);

  MetricsTracker tracker;
  writer.row("initial", nullptr, tracker.observe(world));

  RunOptions ro;
  ro.max_rounds = cfg.run.max_rounds;
  ro.thin = 0;
  const std::uint64_t thin = cfg.run.thin;
  ro.on_round = [&](const World& w, const RoundOutcome& outcome) {
    const MetricsSnapshot snap = tracker.observe(w);
    if (thin != 0 && outcome.round % thin == 0) writer.row("round", &outcome, snap);
  };
  const RunResult res = run(world, stop_predicate(cfg.run.stop), ro);
  const bool exceeded = cfg.run.stop != StopRule::None && res.budget_exceeded();

  Json end;
  end["type"] = "end";
  end["rounds"] = res.rounds_executed;
  end["stopped"] = res.stopped;
  end["budget_exceeded"] = exceeded;
  writer.footer(end);
  file.close();

  out << "run scenario=" << cfg.run.scenario.name() << " n=" << cfg.protocol.n << " seed=" << cfg.protocol.seed
      << " rounds=" << res.rounds_executed << " stopped=" << bool_str(res.stopped) << " trace=" << path.string()
      << '\n';
  return exceeded ? kExitBudgetExceeded : kExitOk;
}

struct SweepCell {
  Scenario scenario;
  std::uint32_t n = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> convergence;
  bool convergence_censored = false;
  std::optional<std::uint64_t> holding;
  bool holding_censored = false;
  std::string error;
};

void run_cell(SweepCell& cell, const ExperimentConfig& cfg) {
  Config c = cfg.protocol;
  c.n = cell.n;
  c.seed = cell.seed;
  try {
    World world = make_world(c, cell.scenario);
    const SweepMeasure m = cfg.sweep.measure;
    if (m != SweepMeasure::Holding) {
      RunOptions ro;
      ro.max_rounds = cfg.run.max_rounds;
      ro.thin = 0;
      const RunResult res = run(world, [](const World& w) { return is_legitimate(w); }, ro);
      cell.convergence = res.rounds_executed;
      cell.convergence_censored = res.budget_exceeded();
      if (cell.convergence_censored) return;
    }
    if (m != SweepMeasure::Convergence) {
      const HoldingTrial h = hold_from(std::move(world), cfg.sweep.holding_rounds);
      cell.holding = h.rounds;
      cell.holding_censored = h.censored;
    }
  } catch (const Error& e) {
    cell.error = e.what();
  }
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::string num_str(double v) { return Json(v).dump(); }

int cmd_sweep(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  const std::vector<std::uint32_t> ns = cfg.sweep.ns.empty() ? std::vector<std::uint32_t>{cfg.protocol.n} : cfg.sweep.ns;

  std::vector<SweepCell> cells;
  for (const Scenario& sc : cfg.sweep.scenarios) {
    for (std::uint32_t n : ns) {
      for (std::uint64_t seed : cfg.sweep.seeds) {
        SweepCell cell;
        cell.scenario = sc;
        cell.n = n;
        cell.seed = seed;
        cells.push_back(std::move(cell));
      }
    }
  }
  parallel_for(cells.size(), o.jobs, [&](std::size_t i) { run_cell(cells[i], cfg); });

  const auto path = prepare_out(o.out_dir, "sweep.csv");
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError(path.string() + ": cannot open for writing");
  file << "#schema=" << kSweepSchema << '\n';
  file << "scenario,n,seed,convergence_round,holding_rounds,censored,holding_censored,error\n";
  auto opt = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); };

  std::size_t failures = 0;
  std::size_t i = 0;
  while (i < cells.size()) {
    std::size_t j = i;
    std::vector<std::uint64_t> conv;
    std::vector<std::uint64_t> hold;
    std::size_t conv_censored = 0;
    std::size_t hold_censored = 0;
    for (; j < cells.size() && cells[j].n == cells[i].n && cells[j].scenario.name() == cells[i].scenario.name(); ++j) {
      const SweepCell& c = cells[j];
      file << csv_field(c.scenario.name()) << ',' << c.n << ',' << c.seed << ',' << opt(c.convergence) << ','
           << opt(c.holding) << ',' << (c.convergence_censored ? 1 : 0) << ',' << (c.holding_censored ? 1 : 0) << ','
           << csv_field(c.error) << '\n';
      if (c.convergence) conv.push_back(*c.convergence);
      if (c.holding) hold.push_back(*c.holding);
      conv_censored += c.convergence_censored ? 1 : 0;
      hold_censored += c.holding_censored ? 1 : 0;
      failures += c.error.empty() ? 0 : 1;
    }
    const Summary sc = summarize(conv, conv_censored);
    const Summary sh = summarize(hold, hold_censored);
    auto stat = [](const Summary& s, double v) { return s.count == 0 ? std::string() : num_str(v); };
    const std::string name = csv_field(cells[i].scenario.name());
    file << name << ',' << cells[i].n << ",mean," << stat(sc, sc.mean) << ',' << stat(sh, sh.mean) << ','
         << conv_censored << ',' << hold_censored << ",\n";
    file << name << ',' << cells[i].n << ",median," << stat(sc, sc.median) << ',' << stat(sh, sh.median) << ','
         << conv_censored << ',' << hold_censored << ",\n";
    file << name << ',' << cells[i].n << ",p95," << stat(sc, sc.p95) << ',' << stat(sh, sh.p95) << ','
         << conv_censored << ',' << hold_censored << ",\n";
    i = j;
  }
  file.close();
  out << "sweep cells=" << cells.size() << " failed=" << failures << " output=" << path.string() << '\n';
  return kExitOk;
}

int cmd_verify(const CommonOptions& o, bool inject_fault, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  VerifyBounds b;
  b.square_range = cfg.verify.square_range;
  b.distance_len = cfg.verify.distance_len;
  b.distance_bound = cfg.verify.distance_bound;
  b.average_k = cfg.verify.average_k;
  b.average_num = cfg.verify.average_num;
  b.ping_trials = cfg.verify.ping_trials;
  b.seed = cfg.protocol.seed;
  b.inject_fault = inject_fault;
  bool ok = true;
  for (const Report& r : verify_all(b)) {
    out << (r.ok() ? "ok   " : "FAIL ") << r.name << " cases=" << r.cases << " violations=" << r.violations << '\n';
    for (const std::string& e : r.examples) out << "     " << e << '\n';
    ok = ok && r.ok();
  }
  return ok ? kExitOk : kExitOracleViolation;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator and experiment runner for the self-stabilizing congestion-control protocol", "stabilis"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  CommonOptions sweep_opts;
  CommonOptions verify_opts;
  bool inject_fault = false;
  CLI::App* run_cmd = app.add_subcommand("run", "simulate one trial and write its per-round trace");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "convergence and holding times over scenarios x n x seeds");
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the brute-force oracle checks");
  add_common(*run_cmd, run_opts);
  add_common(*sweep_cmd, sweep_opts);
  add_common(*verify_cmd, verify_opts);
  verify_cmd->add_flag("--inject-fault", inject_fault, "check a deliberately broken averager (must exit 3)");

  std::vector<const char*> argv{"stabilis"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_opts, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, out);
    return cmd_verify(verify_opts, inject_fault, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace stabilis::cli
