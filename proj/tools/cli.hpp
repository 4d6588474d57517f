#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cotkit::cli {

/// Runs one invocation. `args[0]` is the program name. Errors are reported
/// on `err` as a single `E<code>: <message>` line and returned as the exit
/// code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cotkit::cli
