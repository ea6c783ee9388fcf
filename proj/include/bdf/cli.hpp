#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bdf {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Entry point of the `bdf` tool. `args` excludes the program name. Results
/// go to `out` (or files named by --out); diagnostics go to `err` as one
/// line `bdf: error[CODE]: message`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bdf
