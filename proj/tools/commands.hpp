#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace esci::cli {

enum ExitCode { kOk = 0, kPropertyFailure = 1, kInputError = 2, kNumericError = 3 };

/// Runs the command line `args` (without the program name). Errors are reported on `err`
/// as a single JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Directory holding the built-in named configurations.
std::string data_dir();

}  // namespace esci::cli
