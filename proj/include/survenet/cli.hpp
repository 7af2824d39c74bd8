#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace survenet {

inline constexpr int kExitInputError = 2;
inline constexpr int kExitSolverError = 3;

std::string version_string();

/// Runs the command line `args` (without the program name). Results go to
/// `--output` when given, otherwise to `out`; diagnostics go to `err`.
/// Returns the process exit code: 0 on success, 2 for input errors, 3 for
/// solver failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace survenet
