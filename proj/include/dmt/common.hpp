#ifndef DMT_COMMON_HPP
#define DMT_COMMON_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmt {

/// Bad command-line usage or malformed configuration. CLI exit code 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable, malformed or inconsistent data. CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values or a failed numerical procedure. CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool is_finite(double x) {
    return std::isfinite(x);
}

}

#endif
