#pragma once

#include <iosfwd>

namespace rtp::cli {

/// Runs one `rtp` invocation. Returns 0 on success, 2 on a configuration
/// error and 1 on a runtime error.
int parse_and_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rtp::cli
