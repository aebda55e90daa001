#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace persona {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitRuntime = 2,
    kExitPartial = 3,  // run stopped early; the ledger can be resumed
};

// Subcommands: run, score, report, awareness. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace persona
