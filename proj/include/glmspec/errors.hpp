#pragma once

#include <stdexcept>
#include <string>

namespace glmspec {

enum class ErrorKind {
    PoleHit,
    NonFinite,
    UnsupportedLink,
    NotPositiveDefinite,
    DegenerateLink,
    ADomain,
    BracketFail,
    NoCriticalPoint,
    InvariantViolation,
    ConvergenceFail,
    ConfigError,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace glmspec
