#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sampler::cli {

// Runs the command line `args` (without the program name) and returns the
// process exit code: 0 success, 1 usage or configuration error, 2 infeasible
// or singular problem, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sampler::cli
