#pragma once

#include <stdexcept>
#include <string>

namespace transatt {

// Error categories map one-to-one onto CLI exit codes and C API status values.
enum class ErrorCode {
    internal = 1,
    config = 2,
    data = 3,
    numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorCode::config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorCode::data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorCode::numeric, msg); }

} // namespace transatt
