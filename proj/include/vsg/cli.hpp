#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vsg::cli {

enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kInputError = 2,
  kResourceCap = 3,
};

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kCaseDirEnv = "VSGAME_CASE_DIR";

/// Entry point shared by the vsgame binary and the tests. args excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vsg::cli
