// Command-line front end.  Exit codes: 0 success, 1 runtime failure,
// 2 usage/config error, 3 verification failure.
#pragma once

#include <string>
#include <vector>

namespace wesar {

int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace wesar
