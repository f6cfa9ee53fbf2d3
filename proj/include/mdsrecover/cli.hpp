#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mdsr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDomain = 3;

/// Runs the command line `args` (args[0] is the program name). Never
/// throws; returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mdsr::cli
