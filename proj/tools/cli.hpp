#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gsnpmle::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kNonConvergence = 2,
  kPrecondition = 3,
};

/// args[0] is the program name. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsnpmle::cli
