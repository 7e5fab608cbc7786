#include "stopgame/error.hpp"

namespace stopgame {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnsupportedParameters: return "UnsupportedParameters";
        case ErrorCode::TabulationInvalid: return "TabulationInvalid";
        case ErrorCode::IntegrationFailure: return "IntegrationFailure";
        case ErrorCode::DegenerateSystem: return "DegenerateSystem";
        case ErrorCode::OrderingViolated: return "OrderingViolated";
        case ErrorCode::NonMonotoneScale: return "NonMonotoneScale";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
        case ErrorCode::ArityMismatch: return "ArityMismatch";
        case ErrorCode::EvalDomainError: return "EvalDomainError";
        case ErrorCode::GrowthViolation: return "GrowthViolation";
        case ErrorCode::AnchorBelowF: return "AnchorBelowF";
        case ErrorCode::EndsNotAnchored: return "EndsNotAnchored";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::GridTooLarge: return "GridTooLarge";
        case ErrorCode::NoFiniteValue: return "NoFiniteValue";
        case ErrorCode::ObstacleOrderViolation: return "ObstacleOrderViolation";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace stopgame
