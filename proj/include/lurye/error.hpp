#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lurye {

enum class ErrorCode {
    InvalidArgument,
    PoleOnEvaluationContour,
    RootFindingFailure,
    ImproperTransferFunction,
    NotACounterexampleCandidate,
    UnstablePlant,
    NotSuitable,
    NegativeDiscriminant,
    DegenerateIndexSet,
    NonmonotoneNonlinearity,
    NoFeasibleMultiplier,
    NonfiniteState,
    AlgebraicLoop,
    WindowTooShort,
    NotSettled,
    DegenerateSeparation,
    LengthNotPowerOfTwo,
    UnknownExperiment,
    EmptyRange,
    ConfigError,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::PoleOnEvaluationContour: return "PoleOnEvaluationContour";
        case ErrorCode::RootFindingFailure: return "RootFindingFailure";
        case ErrorCode::ImproperTransferFunction: return "ImproperTransferFunction";
        case ErrorCode::NotACounterexampleCandidate: return "NotACounterexampleCandidate";
        case ErrorCode::UnstablePlant: return "UnstablePlant";
        case ErrorCode::NotSuitable: return "NotSuitable";
        case ErrorCode::NegativeDiscriminant: return "NegativeDiscriminant";
        case ErrorCode::DegenerateIndexSet: return "DegenerateIndexSet";
        case ErrorCode::NonmonotoneNonlinearity: return "NonmonotoneNonlinearity";
        case ErrorCode::NoFeasibleMultiplier: return "NoFeasibleMultiplier";
        case ErrorCode::NonfiniteState: return "NonfiniteState";
        case ErrorCode::AlgebraicLoop: return "AlgebraicLoop";
        case ErrorCode::WindowTooShort: return "WindowTooShort";
        case ErrorCode::NotSettled: return "NotSettled";
        case ErrorCode::DegenerateSeparation: return "DegenerateSeparation";
        case ErrorCode::LengthNotPowerOfTwo: return "LengthNotPowerOfTwo";
        case ErrorCode::UnknownExperiment: return "UnknownExperiment";
        case ErrorCode::EmptyRange: return "EmptyRange";
        case ErrorCode::ConfigError: return "ConfigError";
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

}  // namespace lurye
