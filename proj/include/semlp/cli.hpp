#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semlp {

/// Runs one CLI invocation. `args` excludes the program name. Returns the process exit
/// status: 0 only when the command fully succeeded, 1 on a runtime failure (including a
/// failed gradient check), 2 on a usage or configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace semlp
