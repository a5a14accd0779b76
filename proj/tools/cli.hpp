#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace netshift::cli {

/// Runs the command line with the given arguments (argv[0] excluded) and
/// returns the process exit code: 0 ok, 2 config, 3 data, 4 numerical.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace netshift::cli
