#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sentcomp::cli {

// Exit codes shared by every subcommand.
inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_data = 2;
inline constexpr int exit_numeric = 3;

// Dispatches one invocation (args excludes the program name) and reports
// through the given streams, so tests can drive the full surface in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sentcomp::cli
