// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace robustnmt {

// Runs one command-line invocation. `args` excludes the program name.
// Returns the process exit status: 0 success, 1 usage or configuration
// error, 2 data error, 3 numerical failure. Failures print a one-line
// cause to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace robustnmt
