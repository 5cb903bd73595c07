#pragma once

#include <stdexcept>
#include <string>

namespace ae {

enum class ErrorKind {
    InvalidInput,
    Config,
    ConfigMismatch,
    Numeric,
    Format,
    Parse,
    Sequencing,
    Protocol,
    Training,
    Io,
};

const char* error_kind_name(ErrorKind kind);

// Single exception type for the library; callers switch on kind() to map
// failures onto exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace ae
