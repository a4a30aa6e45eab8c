#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace granorm::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2 };

/// Runs the `granorm` command line. Reports and results go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace granorm::cli
