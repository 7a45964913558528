#include "ncts/log.hpp"

#include <cstdlib>
#include <iostream>

namespace ncts {

int log_level() {
    static const int level = [] {
        const char* v = std::getenv("NCTS_LOG");
        if (v == nullptr) {
            return 0;
        }
        const std::string s(v);
        if (s == "debug" || s == "2") {
            return 2;
        }
        if (s == "info" || s == "1") {
            return 1;
        }
        return 0;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) {
        std::cerr << "[ncts] " << msg << "\n";
    }
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) {
        std::cerr << "[ncts:debug] " << msg << "\n";
    }
}

} // namespace ncts
