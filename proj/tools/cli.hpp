#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ctmc::cli {

// Runs one command line (without the program name). Returns 0 on success or
// PASS, 1 on a failed verification, 2 on usage, ingest or precondition errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ctmc::cli
