#pragma once

// Subcommand front end shared by the nstm binary and its tests.

#include <iosfwd>
#include <string>
#include <vector>

namespace nstm {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitVerificationFailed = 1,  // divergence, failed property, invalid spec
  kExitUsage = 2,               // bad flags, unreadable or malformed data
};

// args[0] is the program name. Reports go to `out`, diagnostics, logs and
// fallback manifests to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv);

}  // namespace nstm
