#include "config_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace stabilis::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const std::string_view item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::uint64_t parse_u64(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint32_t parse_u32(std::string_view s) {
  const std::uint64_t v = parse_u64(s);
  if (v > 0xffffffffULL) throw ConfigError("value " + std::to_string(v) + " is too large");
  return static_cast<std::uint32_t>(v);
}

bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

Rational parse_rational(std::string_view s) {
  try {
    return Rational::parse(s);
  } catch (const OutOfRange& e) {
    throw ConfigError(e.what());
  }
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

struct KeySpec {
  std::string_view section;
  Setter set;
};

const std::map<std::string, KeySpec, std::less<>>& key_table() {
  static const std::map<std::string, KeySpec, std::less<>> table = {
      {"n", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.n = parse_u32(v); }}},
      {"sigma", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.sigma = parse_u32(v); }}},
      {"L", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.L = parse_rational(v); }}},
      {"R", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.R = parse_rational(v); }}},
      {"epsilon", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.epsilon = parse_rational(v); }}},
      {"phat", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.phat = parse_rational(v); }}},
      {"W", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.W = parse_u32(v); }}},
      {"b", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.b = parse_u32(v); }}},
      {"frakc", {"protocol", [](ExperimentConfig& c, std::string_view v) { c.protocol.frakc = parse_rational(v); }}},
      {"seed",
       {"protocol",
        [](ExperimentConfig& c, std::string_view v) {
          c.protocol.seed = parse_u64(v);
          c.seed_given = true;
        }}},

      {"strategy",
       {"estimator", [](ExperimentConfig& c, std::string_view v) { c.protocol.strategy = parse_strategy(trim(v)); }}},
      {"fixed_delta",
       {"estimator", [](ExperimentConfig& c, std::string_view v) { c.protocol.fixed_delta = parse_u64(v); }}},
      {"delta_formula",
       {"estimator",
        [](ExperimentConfig& c, std::string_view v) {
          v = trim(v);
          if (v == "raw") {
            c.protocol.delta_formula = DeltaFormula::Raw;
          } else if (v == "analytic") {
            c.protocol.delta_formula = DeltaFormula::Analytic;
          } else {
            throw ConfigError("expected raw or analytic, got '" + std::string(v) + "'");
          }
        }}},
      {"c_delta", {"estimator", [](ExperimentConfig& c, std::string_view v) { c.protocol.c_delta = parse_rational(v); }}},
      {"visibility_floor",
       {"estimator",
        [](ExperimentConfig& c, std::string_view v) { c.protocol.visibility_floor_enabled = parse_bool(v); }}},
      {"hash_seed", {"estimator", [](ExperimentConfig& c, std::string_view v) { c.protocol.hash_seed = parse_u64(v); }}},
      {"server_id", {"estimator", [](ExperimentConfig& c, std::string_view v) { c.protocol.server_id = parse_u64(v); }}},

      {"fairness_c", {"metrics", [](ExperimentConfig& c, std::string_view v) { c.protocol.fairness_c = parse_u32(v); }}},
      {"weak_beta",
       {"metrics", [](ExperimentConfig& c, std::string_view v) { c.protocol.weak_beta = parse_rational(v); }}},
      {"mu", {"metrics", [](ExperimentConfig& c, std::string_view v) { c.protocol.mu = parse_rational(v); }}},

      {"scenario", {"run", [](ExperimentConfig& c, std::string_view v) { c.run.scenario = Scenario::parse(trim(v)); }}},
      {"max_rounds", {"run", [](ExperimentConfig& c, std::string_view v) { c.run.max_rounds = parse_u64(v); }}},
      {"thin", {"run", [](ExperimentConfig& c, std::string_view v) { c.run.thin = parse_u64(v); }}},
      {"stop",
       {"run",
        [](ExperimentConfig& c, std::string_view v) {
          v = trim(v);
          if (v == "legitimate") {
            c.run.stop = StopRule::Legitimate;
          } else if (v == "busy") {
            c.run.stop = StopRule::Busy;
          } else if (v == "none") {
            c.run.stop = StopRule::None;
          } else {
            throw ConfigError("expected legitimate, busy or none, got '" + std::string(v) + "'");
          }
        }}},
      {"suppress_replies",
       {"run", [](ExperimentConfig& c, std::string_view v) { c.run.suppress_replies = parse_bool(v); }}},
      {"format", {"run", [](ExperimentConfig& c, std::string_view v) { c.run.format = parse_format(trim(v)); }}},

      {"scenarios",
       {"sweep",
        [](ExperimentConfig& c, std::string_view v) {
          c.sweep.scenarios.clear();
          for (std::string_view s : split_commas(v)) c.sweep.scenarios.push_back(Scenario::parse(s));
          if (c.sweep.scenarios.empty()) throw ConfigError("empty scenario list");
        }}},
      {"ns",
       {"sweep",
        [](ExperimentConfig& c, std::string_view v) {
          c.sweep.ns.clear();
          for (std::uint64_t n : parse_u64_list(v)) {
            if (n == 0 || n > 0xffffffffULL) throw ConfigError("n out of range: " + std::to_string(n));
            c.sweep.ns.push_back(static_cast<std::uint32_t>(n));
          }
        }}},
      {"seeds", {"sweep", [](ExperimentConfig& c, std::string_view v) { c.sweep.seeds = parse_u64_list(v); }}},
      {"measure",
       {"sweep",
        [](ExperimentConfig& c, std::string_view v) {
          v = trim(v);
          if (v == "convergence") {
            c.sweep.measure = SweepMeasure::Convergence;
          } else if (v == "holding") {
            c.sweep.measure = SweepMeasure::Holding;
          } else if (v == "both") {
            c.sweep.measure = SweepMeasure::Both;
          } else {
            throw ConfigError("expected convergence, holding or both, got '" + std::string(v) + "'");
          }
        }}},
      {"holding_rounds",
       {"sweep", [](ExperimentConfig& c, std::string_view v) { c.sweep.holding_rounds = parse_u64(v); }}},

      {"square_range",
       {"verify", [](ExperimentConfig& c, std::string_view v) {
          c.verify.square_range = static_cast<std::int64_t>(parse_u32(v));
        }}},
      {"distance_len",
       {"verify", [](ExperimentConfig& c, std::string_view v) { c.verify.distance_len = parse_u32(v); }}},
      {"distance_bound",
       {"verify", [](ExperimentConfig& c, std::string_view v) {
          c.verify.distance_bound = static_cast<std::int64_t>(parse_u32(v));
        }}},
      {"average_k", {"verify", [](ExperimentConfig& c, std::string_view v) { c.verify.average_k = parse_u32(v); }}},
      {"average_num", {"verify", [](ExperimentConfig& c, std::string_view v) { c.verify.average_num = parse_u64(v); }}},
      {"ping_trials", {"verify", [](ExperimentConfig& c, std::string_view v) { c.verify.ping_trials = parse_u64(v); }}},
  };
  return table;
}

bool known_section(std::string_view name) {
  return name == "protocol" || name == "estimator" || name == "metrics" || name == "run" || name == "sweep" ||
         name == "verify";
}

}  // namespace

std::vector<std::uint64_t> parse_u64_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (std::string_view item : split_commas(text)) {
    if (const auto dots = item.find(".."); dots != std::string_view::npos) {
      const std::uint64_t lo = parse_u64(item.substr(0, dots));
      const std::uint64_t hi = parse_u64(item.substr(dots + 2));
      if (hi < lo) throw ConfigError("empty range '" + std::string(item) + "'");
      if (hi - lo >= 10'000'000) throw ConfigError("range '" + std::string(item) + "' is too long");
      for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_u64(item));
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string_view to_string(StopRule s) {
  switch (s) {
    case StopRule::Legitimate: return "legitimate";
    case StopRule::Busy: return "busy";
    case StopRule::None: return "none";
  }
  return "?";
}

std::string_view to_string(OutputFormat f) { return f == OutputFormat::Jsonl ? "jsonl" : "csv"; }

OutputFormat parse_format(std::string_view text) {
  if (text == "jsonl") return OutputFormat::Jsonl;
  if (text == "csv") return OutputFormat::Csv;
  throw ConfigError("unknown format '" + std::string(text) + "' (expected jsonl or csv)");
}

ExperimentConfig parse_config_text(std::string_view text, std::string_view origin) {
  ExperimentConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key before '='");

    const auto& table = key_table();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (!section.empty() && it->second.section != section) {
      throw ConfigError(where + "key '" + std::string(key) + "' belongs in [" + std::string(it->second.section) +
                        "], not [" + section + "]");
    }
    if (value.empty()) throw ConfigError(where + "key '" + std::string(key) + "' has no value");
    try {
      it->second.set(cfg, value);
    } catch (const Error& e) {
      throw ConfigError(where + "key '" + std::string(key) + "': " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace stabilis::cli
