#pragma once

#include <ostream>

namespace rtrace::cli {

enum ExitCode : int { kOk = 0, kPartialFailure = 1, kUsage = 2 };

/// Entry point behind the `rtrace` executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rtrace::cli
