#pragma once

namespace backaction {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitPartialFailure = 4,
};

/// Entry point of the `backaction` executable. Returns the process exit code.
int run_cli(int argc, char** argv);

} // namespace backaction
