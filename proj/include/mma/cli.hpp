#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mma {

/// Exit codes of the `mma` tool.
enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitUsage = 2, kExitIo = 3 };

struct CliOptions {
  bool color = false;  // ANSI colour on diagnostics
};

/// Runs `mma` with `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, CliOptions options = {});

}  // namespace mma
