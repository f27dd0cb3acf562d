#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssp::cli {

enum ExitCode : int {
  kSuccess = 0,
  kVerificationFailure = 1,
  kInputError = 2,
  kDivergence = 3,
};

/// Environment variable naming the directory that relative output paths
/// resolve against.
inline constexpr const char* kOutputDirEnv = "SSP_OUTPUT_DIR";

/// Runs the command line `args` (without the program name). Reports go to
/// `out` or to the files named by --out; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssp::cli
