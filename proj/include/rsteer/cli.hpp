#pragma once

#include "rsteer/error.hpp"

namespace rsteer {

/// Exit codes: 0 ok, 2 usage, 3 data error, 4 external service, 5 internal invariant.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitExternal = 4;
inline constexpr int kExitInvariant = 5;

int exit_code_for(ErrorCode code);

int run_cli(int argc, const char* const* argv);

}  // namespace rsteer
