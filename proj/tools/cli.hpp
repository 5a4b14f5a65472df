#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rugbayes::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNumericFailure = 1;
inline constexpr int kInputFailure = 2;

// Runs one command line (without the program name). Messages go to out and
// err; the return value is the process exit code.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace rugbayes::cli
