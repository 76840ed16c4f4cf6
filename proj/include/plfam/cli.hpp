#pragma once

#include <string>
#include <vector>

namespace plfam {

// Runs one command given argv-style arguments (program name excluded).
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(std::vector<std::string> args);

}  // namespace plfam
