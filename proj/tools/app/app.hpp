#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace factorgate::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRemote = 3;

// Runs the command line (args excludes argv[0]). Results go to `out`,
// diagnostics to `err`; every command writes its files and a manifest into
// the run directory.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace factorgate::app
