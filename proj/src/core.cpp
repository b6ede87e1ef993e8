#include "echoloop/core.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace echoloop {

namespace {

LogLevel level_from_env() {
    const char* env = std::getenv("ECHOLOOP_LOG");
    if (env == nullptr) return LogLevel::warn;
    const std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "warn") return LogLevel::warn;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

LogLevel g_level = level_from_env();
std::mutex g_log_mutex;

const char* tag(LogLevel level) {
    switch (level) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        case LogLevel::debug: return "debug";
    }
    return "?";
}

}  // namespace

LogLevel log_level() { return g_level; }

void set_log_level(LogLevel level) { g_level = level; }

void log(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > static_cast<int>(g_level)) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::cerr << "[" << tag(level) << "] " << message << "\n";
}

}  // namespace echoloop
