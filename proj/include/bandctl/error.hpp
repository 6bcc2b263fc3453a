#pragma once

#include <stdexcept>
#include <string>

namespace bandctl {

enum class ErrorKind {
    ParamOutOfRange,
    ZeroJump,
    DomainError,
    SingularSystem,
    OutOfRange,
    ConvergenceFailure,
    InvalidConfig,
    InadmissiblePolicy,
    NonConvergence,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorKind::ZeroJump: return "ZeroJump";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InadmissiblePolicy: return "InadmissiblePolicy";
    case ErrorKind::NonConvergence: return "NonConvergence";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a kind so that callers (the
/// CLI in particular) can map it to an exit status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by validate_params; `field()` names the violated constraint.
class ParamOutOfRange : public Error {
public:
    ParamOutOfRange(std::string field, const std::string& why)
        : Error(ErrorKind::ParamOutOfRange, field + " " + why), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace bandctl
