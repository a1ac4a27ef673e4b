#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cegzsl::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kUsage = 2, kRuntime = 3 };

// Entry point of the command-line tool. Subcommands: synth-data, train, eval,
// ablate, gradcheck. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cegzsl::cli
