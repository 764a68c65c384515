#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridvqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;    // bad usage, missing path, invalid config or input
inline constexpr int kExitNumeric = 3;  // non-finite loss during training

// Runs one command line (args[0] is the program name). Human-readable
// progress goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridvqa::cli
