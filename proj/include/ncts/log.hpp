#pragma once

#include <string>

namespace ncts {

// Verbosity from NCTS_LOG: 0 quiet (default), 1 info, 2 debug.
int log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

} // namespace ncts
