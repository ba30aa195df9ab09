#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace zcae {

// Exit codes of every subcommand.
enum ExitCode : int { kExitOk = 0, kExitDivergence = 1, kExitInput = 2, kExitInternal = 3 };

// Runs one `zcae` invocation; args[0] is the program name. Reports go to
// `out`, progress and `reason=<code>` error lines to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zcae
