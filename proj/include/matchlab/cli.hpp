#pragma once

#include <iosfwd>

namespace matchlab {

// Parses argv and runs one subcommand, writing to the injected streams so
// tests can capture output. Returns the process exit code: 0 on success,
// 1 on runtime failure, 2 on invalid configuration or usage.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace matchlab
