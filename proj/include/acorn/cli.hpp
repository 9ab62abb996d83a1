#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace acorn {

// Exit codes: 0 success, 1 data error, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace acorn
