#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmmgl::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 2;
inline constexpr int kNumericFailure = 3;
inline constexpr int kStateCollapse = 4;

/// Runs the command line (args excludes the program name). Subcommands:
/// fit, prune, simulate, eval, bench.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hmmgl::cli
