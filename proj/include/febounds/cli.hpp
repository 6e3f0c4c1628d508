#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace febounds {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSampler = 3;
inline constexpr int kExitOracle = 4;

// Entry point shared by the febounds binary and the tests. args[0] is the
// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace febounds
