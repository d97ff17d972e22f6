#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace f3m {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInvalidInput = 2, kExitResource = 3, kExitInternal = 4 };

/// Runs one f3m command (gen, ingest, matvec, bench, krr, account) with argv-style
/// arguments, argv[0] being the program name. Reports go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace f3m
