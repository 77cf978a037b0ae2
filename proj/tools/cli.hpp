#pragma once

#include <ostream>
#include <span>
#include <string>

namespace phasetip::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericalError = 3,
};

// Runs one invocation. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace phasetip::cli
