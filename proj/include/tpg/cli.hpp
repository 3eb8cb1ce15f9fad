#pragma once

#include <iosfwd>

namespace tpg {

enum ExitCode : int {
  exit_ok = 0,
  exit_violation = 1,
  exit_config = 2,
  exit_theta5 = 3,
  exit_numeric = 4,
};

// Entry point of the `tpg` tool: run <config> | sweep <config> | audit <trace-dir>.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tpg
