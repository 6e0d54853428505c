#pragma once

// Command-line front end: list, train, integrate, compare, sweep.

#include <iosfwd>
#include <string>
#include <vector>

namespace oinn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;    // I/O and other library errors
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;  // non-finite loss, step underflow, non-finite state

// Default output directory when --out is not given.
inline constexpr const char* kOutDirEnv = "OINN_OUT_DIR";

// Runs one command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oinn::cli
