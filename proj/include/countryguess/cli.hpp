#pragma once

// Command-line front end. Implemented in src/cli.cpp (link countryguess_cli).

#include <iosfwd>

namespace countryguess {

/// Runs the `countryguess` command line and returns its exit code (see exit_code).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace countryguess
