#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crossview::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kDegenerate = 3,
};

/// Runs the command line `args` (without the program name). Reports go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies the CROSSVIEW_LOG environment variable to the global logger.
void configure_logging();

}  // namespace crossview::cli
