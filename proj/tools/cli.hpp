#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arcfit::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kUsageError = 2,
  kOptimizerError = 3,
};

/// Runs the arcfit command line. args excludes the program name. Results go
/// to out, diagnostics to err; `-` as an input path reads from in.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace arcfit::cli
