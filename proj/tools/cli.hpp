#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fmfm::cli {

// Runs one command line (args[0] is the program name). Errors are reported on
// `err` as a single "error: <code>: <message>" line; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fmfm::cli
