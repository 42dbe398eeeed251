#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace diffplan::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitPlannerEmpty = 3,
};

/// Runs one subcommand (gen-data, train, plan, eval, plot). `args` excludes the
/// program name. Failures print a JSON error record to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace diffplan::cli
