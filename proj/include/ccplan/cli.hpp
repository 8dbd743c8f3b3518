#pragma once

#include <iosfwd>

namespace ccplan::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kParse = 3,
  kInfeasibleRelaxation = 4,
  kNotConverged = 5,
  kCertificationFailed = 6,
  kMonteCarloBelowTarget = 7,
  kQpFailure = 8,
  kIo = 9,
};

/// Entry point of the ccplan tool: subcommands quantile, solve and validate.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ccplan::cli
