#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace factgap {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// Runs the `factgap` command line; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace factgap
