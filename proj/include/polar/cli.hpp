#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace polar::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsageError = 1, kDataError = 2 };

/// Runs one subcommand. `args` excludes the program name. Output meant for
/// the user goes to `out`, diagnostics and usage text to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

/// Shortest round-trip decimal for CSV and reports ('.' separator, no
/// locale dependence).
std::string format_number(double v);

}  // namespace polar::cli
