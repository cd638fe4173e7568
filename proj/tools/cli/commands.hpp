#pragma once

#include <ostream>

namespace deconas::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses the command line and runs exactly one subcommand. Flags win over
/// the --config file, which wins over DECONAS_* environment variables,
/// which win over the --profile defaults.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace deconas::cli
