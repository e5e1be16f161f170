#pragma once

#include <iosfwd>

namespace hmfg::cli {

// Exit codes: 0 success with every enabled check passing, 1 solver failure or a failed
// check, 2 configuration or usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hmfg::cli
