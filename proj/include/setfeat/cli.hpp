#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace setfeat {

/// Command-line entry point. Returns 0 on success, 2 on usage errors or
/// missing inputs, 1 on internal failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace setfeat
