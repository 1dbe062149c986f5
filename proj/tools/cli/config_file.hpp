#pragma once

// Experiment configuration files.
//
//   # comment
//   [protocol]
//   n = 64
//   epsilon = 1/4
//   [sweep]
//   scenarios = legitimate, arbitrary
//   seeds = 1..20
//
// One `key = value` per line. A key inside a section must belong to that
// section; a key before the first section header is looked up by name.
// Every error carries "<origin>:<line>:".

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stabilis/core.hpp"
#include "stabilis/scenarios.hpp"

namespace stabilis::cli {

enum class StopRule { Legitimate, Busy, None };
enum class OutputFormat { Jsonl, Csv };
enum class SweepMeasure { Convergence, Holding, Both };

struct RunSettings {
  Scenario scenario{ScenarioKind::Arbitrary};
  std::uint64_t max_rounds = 100'000;
  std::uint64_t thin = 1;
  StopRule stop = StopRule::Legitimate;
  bool suppress_replies = false;
  OutputFormat format = OutputFormat::Jsonl;
};

struct SweepSettings {
  std::vector<Scenario> scenarios{Scenario{ScenarioKind::Legitimate}};
  /// Empty means the protocol n.
  std::vector<std::uint32_t> ns;
  std::vector<std::uint64_t> seeds{1};
  SweepMeasure measure = SweepMeasure::Both;
  std::uint64_t holding_rounds = 100'000;
};

struct VerifySettings {
  std::int64_t square_range = 200;
  std::size_t distance_len = 4;
  std::int64_t distance_bound = 5;
  std::size_t average_k = 4;
  std::uint64_t average_num = 16;
  std::uint64_t ping_trials = 1'000'000;
};

struct ExperimentConfig {
  Config protocol;
  /// Set when the file gave a seed explicitly.
  bool seed_given = false;
  RunSettings run;
  SweepSettings sweep;
  VerifySettings verify;
};

ExperimentConfig parse_config_text(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config_file(const std::string& path);

/// "1..5", "1, 2, 7" or a mix such as "1..3, 10".
std::vector<std::uint64_t> parse_u64_list(std::string_view text);

std::string_view to_string(StopRule s);
std::string_view to_string(OutputFormat f);
OutputFormat parse_format(std::string_view text);

}  // namespace stabilis::cli
