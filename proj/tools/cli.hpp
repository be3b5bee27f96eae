#pragma once

#include <string>
#include <vector>

namespace affinelp::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNegative = 1;  // rank failure, residual failure, unbounded
inline constexpr int kExitUsage = 2;

// Runs one subcommand; args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace affinelp::cli
