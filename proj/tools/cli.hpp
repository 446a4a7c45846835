#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mdspline::cli {

/// Exit codes: 0 success, 2 usage error, 3 data error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Runs the tool with `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mdspline::cli
