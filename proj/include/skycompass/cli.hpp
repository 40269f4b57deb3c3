#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skycompass::cli {

/// Stable process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 2, kRuntime = 3 };

inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skycompass::cli
