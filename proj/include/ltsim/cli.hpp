#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ltsim {

inline constexpr const char* kVersion = "1.0.0";

/// Stable exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 2,
    kExitNumeric = 3,
    kExitIo = 4,
};

/// Runs `ltsim <command> ...`; args excludes the program name. Errors are
/// reported on `err` and mapped to the exit codes above.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ltsim
