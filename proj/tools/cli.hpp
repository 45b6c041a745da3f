#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hybridest::cli {

enum ExitCode : int {
  kOk = 0,
  kOtherFailure = 1,
  kInputError = 2,
  kNumericalFailure = 3,
};

// Runs one command line (args[0] is the program name). Reports go to files
// under the output directory; progress and tables to `out`, diagnostics to
// `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hybridest::cli
