#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace factum::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitConfig = 2;

// Parses `args` (without the program name) and runs one subcommand. Errors are
// reported on `err`; the return value is the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace factum::cli
