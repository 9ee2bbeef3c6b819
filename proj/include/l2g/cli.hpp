#pragma once

#include <string>
#include <vector>

namespace l2g {

/// Exit codes of the command-line front end.
enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_usage = 2, exit_data = 3, exit_numeric = 4 };

/// Runs one command line (argv[0] is the program name).
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace l2g
