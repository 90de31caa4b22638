#pragma once

#include <iosfwd>

namespace qdsq {

enum ExitCode { exit_ok = 0, exit_validation = 1, exit_numerical = 2 };

// Entry point of the command-line tool. Results go to files (and `steady` prints key=value
// lines on out); progress and errors go to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qdsq
