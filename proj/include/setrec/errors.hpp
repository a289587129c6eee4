#pragma once

#include <stdexcept>
#include <string>

namespace setrec {

// Error categories map onto CLI exit codes: ConfigError -> 1, DataError -> 2,
// everything else -> 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelError : std::runtime_error {
    explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace setrec
