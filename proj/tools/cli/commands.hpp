#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stabilis::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitBudgetExceeded = 2,
  kExitOracleViolation = 3,
};

inline constexpr const char* kTraceSchema = "stabilis.trace/1";
inline constexpr const char* kSweepSchema = "stabilis.sweep/1";

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stabilis::cli
