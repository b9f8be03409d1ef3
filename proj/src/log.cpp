#include "fm/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace fm {

namespace {

LogLevel level_from_env() {
    const char* env = std::getenv("FEEDBACK_MINER_LOG");
    if (!env)
        return LogLevel::info;
    const std::string v(env);
    if (v == "error")
        return LogLevel::error;
    if (v == "debug")
        return LogLevel::debug;
    return LogLevel::info;
}

LogLevel g_level = level_from_env();
std::mutex g_mutex;

const char* tag(LogLevel lvl) {
    switch (lvl) {
    case LogLevel::error:
        return "error";
    case LogLevel::info:
        return "info";
    default:
        return "debug";
    }
}

} // namespace

LogLevel log_level() { return g_level; }

void set_log_level(LogLevel lvl) { g_level = lvl; }

namespace detail {

void log_line(LogLevel lvl, const std::string& msg) {
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "[" << tag(lvl) << "] " << msg << "\n";
}

} // namespace detail

} // namespace fm
