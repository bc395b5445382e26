#pragma once

#include <iosfwd>

namespace fipe::cli {

enum ExitCode {
  kOk = 0,
  kInternal = 1,  // solver failure, cycle guard, consistency checks
  kInfeasible = 2,
  kNotIdentical = 3,
  kBadInput = 4,
  kIterationLimit = 5,
};

inline constexpr int kReportFormatVersion = 1;

// Entry point of the `fipe` tool. Messages go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fipe::cli
