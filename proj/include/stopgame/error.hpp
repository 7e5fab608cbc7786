#pragma once

#include <stdexcept>
#include <string>

namespace stopgame {

/// Every failure the library reports. The CLI maps these onto exit codes.
enum class ErrorCode {
    UnsupportedParameters,
    TabulationInvalid,
    IntegrationFailure,
    DegenerateSystem,
    OrderingViolated,
    NonMonotoneScale,
    OutOfRange,
    SyntaxError,
    UnknownIdentifier,
    ArityMismatch,
    EvalDomainError,
    GrowthViolation,
    AnchorBelowF,
    EndsNotAnchored,
    NoConvergence,
    GridTooLarge,
    NoFiniteValue,
    ObstacleOrderViolation,
    BudgetExceeded,
    ConfigError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace stopgame
