#pragma once

#include <stdexcept>
#include <string>

namespace fm {

// Error categories map 1:1 onto CLI exit codes (see tools/): usage/config
// problems exit 1, bad input data exits 2, runtime failures exit 3.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class RunError : public std::runtime_error {
public:
    explicit RunError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fm
