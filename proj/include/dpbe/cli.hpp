#pragma once

// Command-line front end: `simulate`, `identities` and `exponent`.
//
// Exit codes: 0 success, 1 a check or identity failed, 2 configuration
// error, 3 budget, resource or manifest error.

#include <iosfwd>
#include <string>
#include <vector>

namespace dpbe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitResource = 3;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "DPBE_OUTPUT_DIR";

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string config_hash(const std::string& text);

}  // namespace dpbe
