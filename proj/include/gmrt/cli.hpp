#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gmrt {

enum ExitCode : int {
  exit_ok = 0,
  exit_config_error = 2,
  exit_diagnostics_failure = 3,
  exit_runtime_failure = 4,
};

/// Entry point of the `gmrt` tool: `fit`, `simulate` and `benchmark`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gmrt
