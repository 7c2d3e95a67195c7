#pragma once

namespace raptor::cli {

// Full command-line surface; returns the process exit code.
// Exit codes: 0 success, 2 missing input path, 1 any other failure.
int run(int argc, const char* const* argv);

} // namespace raptor::cli
