#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pvalfn::cli {

enum ExitCode : int { ok = 0, config_error = 2, numerical_failure = 3 };

/// Run one command line (without the program name). Results go to `out`,
/// diagnostics to `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pvalfn::cli
