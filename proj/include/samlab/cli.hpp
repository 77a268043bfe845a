#pragma once

#include <string>
#include <vector>

namespace samlab::cli {

// Runs one command (train | attack | spectrum | shift-trial | interp-curve).
// Returns the process exit code: 0 success, 2 config error, 3 numerical abort.
int run(const std::vector<std::string>& args);

}  // namespace samlab::cli
