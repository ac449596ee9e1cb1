#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace modt {

/// Runs one `modt` invocation. `args` excludes the program name. Returns 0 on
/// success, 2 for usage errors, 3 for data errors, 4 for training errors and
/// 5 for file errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modt
