#pragma once

namespace lhf::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kDataError = 3,
  kInvariantViolation = 4,
};

/// Parses argv, runs one subcommand and maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace lhf::cli
