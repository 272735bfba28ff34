#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smpca::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

/// Parses the arguments (argv[0] excluded), runs the subcommand, maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smpca::cli
