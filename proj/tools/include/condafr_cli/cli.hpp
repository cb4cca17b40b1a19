#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace condafr::cli {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, numeric_error = 3 };

/// Runs one command line (without the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace condafr::cli
