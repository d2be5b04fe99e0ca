#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace nsp {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("NSP_LOG");
        if (!env) return LogLevel::warn;
        const std::string v(env);
        if (v == "debug") return LogLevel::debug;
        if (v == "info") return LogLevel::info;
        if (v == "warn") return LogLevel::warn;
        if (v == "error") return LogLevel::error;
        if (v == "off") return LogLevel::off;
        return LogLevel::warn;
    }();
    return level;
}

inline void log_at(LogLevel level, const char* tag, const std::string& msg) {
    if (level < log_level()) return;
    std::cerr << "[nsp:" << tag << "] " << msg << "\n";
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::debug, "debug", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::info, "info", msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::warn, "warn", msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::error, "error", msg); }

}  // namespace nsp
