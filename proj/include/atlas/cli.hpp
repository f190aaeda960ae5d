#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace atlas {

// Runs the command line `args` (without the program name). Analysis payloads
// go to `out` (or --out files), diagnostics and the error line to `err`.
// Exit codes: 0 success, 1 engine error ("error: <Name>: message"),
// 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace atlas
