#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace patchstart {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // attack did not succeed, or initialization exhausted
  kExitUsage = 2,    // bad flags, invalid config or manifest
  kExitIo = 3,       // file, codec or transport error
};

// Runs one command line (args[0] is the program name). Output files are
// written atomically; every command also writes its effective config.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patchstart
