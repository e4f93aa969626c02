#pragma once

#include <iosfwd>

namespace bbmtraps::cli {

enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kConvergence = 3,
  kCapacity = 4,
  kAcceptance = 5,
};

/// Entry point shared by the binary and the CLI tests. Normal output goes to
/// `out`; errors are written to `err` as one JSON object.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bbmtraps::cli
