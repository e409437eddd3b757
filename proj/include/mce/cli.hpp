#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mce::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

/// Runs one subcommand. `args` excludes the program name. Normal output goes
/// to `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mce::cli
