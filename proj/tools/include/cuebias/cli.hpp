#pragma once

#include <ostream>

namespace cuebias::cli {

// Exit codes besides 0 (success) and CLI11's own usage-error codes.
inline constexpr int kExitFailure = 1;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitIncomplete = 4;

// Environment variable naming the default store root.
inline constexpr const char* kRootEnv = "CUEBIAS_ROOT";

// Runs one command line. Results go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cuebias::cli
