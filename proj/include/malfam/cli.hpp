#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace malfam {

/// Exit status of a CLI run.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Runs one subcommand. `args` excludes the program name. Reports go to
/// files or `out`; logging, usage and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace malfam
