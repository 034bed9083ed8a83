#pragma once

#include <stdexcept>
#include <string>

namespace gazeclip {

enum class ErrorKind {
    kDimension,
    kDomain,
    kContract,
    kNumeric,
    kData,
    kProtocol,
    kConfig,
    kVersion,
    kVerification,
};

const char* to_string(ErrorKind kind);

/// Process exit code for an error kind: data/version 2, protocol 3,
/// verification 4, everything else 1.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

inline void require(bool condition, ErrorKind kind, const char* message) {
    if (!condition) fail(kind, message);
}

}  // namespace gazeclip
