#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tsnca::cli {

// Runs the command line `args` (without the program name). Returns the
// process exit code; failures print one line "error: <code>: <reason>" to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsnca::cli
