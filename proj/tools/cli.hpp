#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gazemotion::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kIo = 3 };

/// Runs the tool on `args` (args[0] is the program name). Results go to
/// `out`; diagnostics and the resolved configuration go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gazemotion::cli
