#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mtbandit {

/// Exit codes: 0 success, 2 configuration or usage error, 3 algorithm failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFailure = 3;

/// Entry point of the `mtbandit` tool. `args` excludes the program name.
/// Results go to `out` unless --out is given; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace mtbandit
