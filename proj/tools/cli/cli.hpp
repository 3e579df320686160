#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace barrier::cli {

enum ExitCode : int {
    kPass = 0,
    kFail = 1,
    kInconclusive = 2,
    kConfigError = 64,
    kInternalError = 70,
};

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace barrier::cli
