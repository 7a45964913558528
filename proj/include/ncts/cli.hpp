#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ncts {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitUsage = 64;

// args excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ncts
