#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sfbm::cli {

/// Exit status for usage errors: unknown flags, malformed values, missing files.
inline constexpr int kUsageError = 2;

/// Parses argv and runs one subcommand. Returns the process exit status:
/// 0 on success, 1 when a verification campaign fails, 2 on usage errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sfbm::cli
