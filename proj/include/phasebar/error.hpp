#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phasebar {

enum class ErrorCode {
    NegativeOffDiagonal,
    PositiveDiagonal,
    NegativeExitRate,
    RestartNotProbability,
    SingularSubintensity,
    InvalidArgument,
    QueryBeyondDomain,
    GridMismatch,
    DomainTooSmall,
    MaxItersExceeded,
    InvariantViolation,
    ParseError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NegativeOffDiagonal: return "NegativeOffDiagonal";
        case ErrorCode::PositiveDiagonal: return "PositiveDiagonal";
        case ErrorCode::NegativeExitRate: return "NegativeExitRate";
        case ErrorCode::RestartNotProbability: return "RestartNotProbability";
        case ErrorCode::SingularSubintensity: return "SingularSubintensity";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::QueryBeyondDomain: return "QueryBeyondDomain";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::DomainTooSmall: return "DomainTooSmall";
        case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace phasebar
