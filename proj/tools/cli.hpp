// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace fastsae::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3, kFormat = 4 };

/// Entry point of the `fastsae` tool; output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fastsae::cli
