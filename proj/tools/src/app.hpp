#pragma once

#include <string>
#include <vector>

namespace propattest::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitTraining = 3;
inline constexpr int kExitIo = 4;

// Parses argv and runs one subcommand; never throws.
int run_app(int argc, char** argv);

}  // namespace propattest::cli
