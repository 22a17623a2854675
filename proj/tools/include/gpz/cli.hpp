#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace gpz::cli {

/// Exit codes of the command-line front end.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;

/// Runs one subcommand. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace gpz::cli
