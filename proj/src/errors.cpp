#include "glmspec/errors.hpp"

namespace glmspec {

const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::PoleHit: return "PoleHit";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::UnsupportedLink: return "UnsupportedLink";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DegenerateLink: return "DegenerateLink";
    case ErrorKind::ADomain: return "ADomain";
    case ErrorKind::BracketFail: return "BracketFail";
    case ErrorKind::NoCriticalPoint: return "NoCriticalPoint";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::ConvergenceFail: return "ConvergenceFail";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

} // namespace glmspec
