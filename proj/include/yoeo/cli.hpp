#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace yoeo {

/// Entry point of the `yoeo` tool. `args` excludes the program name.
/// Returns the process exit code: 0 on success, otherwise the numeric
/// ErrorCode, with a "YOEO-E<code>:" line on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace yoeo
