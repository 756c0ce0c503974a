#pragma once

#include <string>
#include <vector>

namespace evikit::cli {

/// Exit codes of the evikit executable.
enum ExitCode : int { kOk = 0, kValidationError = 1, kIoError = 2 };

/// Dispatches one subcommand. Diagnostics go to stderr; results go to files.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

} // namespace evikit::cli
