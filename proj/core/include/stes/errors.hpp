#pragma once

#include <stdexcept>
#include <string>

namespace stes {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
    config = 2,
    data = 3,
    numeric = 4,
    io = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorCode::config, w) {}
};

struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorCode::data, w) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorCode::numeric, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCode::io, w) {}
};

}  // namespace stes
