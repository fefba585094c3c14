#pragma once

#include <iosfwd>

namespace lsgd::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitCapacity = 3,
  kExitDivergence = 4,
};

/// Parses arguments, runs one command and maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lsgd::app
