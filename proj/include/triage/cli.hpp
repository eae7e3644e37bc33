#pragma once

namespace triage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitGradCheck = 3;

// Runs the command-line interface in-process; returns the exit code.
int run(int argc, const char* const* argv);

}  // namespace triage::cli
