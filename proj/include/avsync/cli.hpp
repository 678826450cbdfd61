#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace avsync {

// Runs one `avsync` command. Progress goes to `out`; failures print a single
// line "error <code>: <message>" to `err` and return the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* tool_version();

}  // namespace avsync
