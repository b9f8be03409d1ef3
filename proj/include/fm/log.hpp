#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace fm {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Level comes from FEEDBACK_MINER_LOG={error|info|debug}; default info.
LogLevel log_level();
void set_log_level(LogLevel lvl);

namespace detail {
void log_line(LogLevel lvl, const std::string& msg);

template <typename... Args>
std::string cat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}
} // namespace detail

template <typename... Args>
void log_error(Args&&... args) {
    detail::log_line(LogLevel::error, detail::cat(std::forward<Args>(args)...));
}

template <typename... Args>
void log_info(Args&&... args) {
    if (log_level() >= LogLevel::info)
        detail::log_line(LogLevel::info, detail::cat(std::forward<Args>(args)...));
}

template <typename... Args>
void log_debug(Args&&... args) {
    if (log_level() >= LogLevel::debug)
        detail::log_line(LogLevel::debug, detail::cat(std::forward<Args>(args)...));
}

} // namespace fm
