#ifndef DWNET_CLI_HPP
#define DWNET_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dwnet::cli {

/// Runs the dwnet command line in-process. `args` excludes the program name.
/// Returns the process exit code: 0 success, 1 usage error, 2 data or config
/// error, 3 numerical failure (divergence, failed gradient check).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dwnet::cli

#endif  // DWNET_CLI_HPP
