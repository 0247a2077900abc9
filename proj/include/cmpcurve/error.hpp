#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmpcurve {

enum class ErrorCode {
    NegativeTime,
    BadEventCode,
    RaggedCovariates,
    NonFinite,
    NoCause1Events,
    TooFewEvents,
    DimensionMismatch,
    TooFewRecords,
    AllWeightsZero,
    ZeroGhatAtDeterminable,
    SingularInformation,
    NotConverged,
    Separation,
    DegenerateScores,
    DegenerateResponses,
    EmptyInput,
    InvalidConfig,
    AllRepetitionsFailed,
    TooFewReplicates,
    TooManyFailedReplicates,
    TooManyFailedSimulations,
    UnknownSetting,
    Parse,
    Io,
};

inline constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NegativeTime: return "NegativeTime";
        case ErrorCode::BadEventCode: return "BadEventCode";
        case ErrorCode::RaggedCovariates: return "RaggedCovariates";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NoCause1Events: return "NoCause1Events";
        case ErrorCode::TooFewEvents: return "TooFewEvents";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::TooFewRecords: return "TooFewRecords";
        case ErrorCode::AllWeightsZero: return "AllWeightsZero";
        case ErrorCode::ZeroGhatAtDeterminable: return "ZeroGhatAtDeterminable";
        case ErrorCode::SingularInformation: return "SingularInformation";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::Separation: return "Separation";
        case ErrorCode::DegenerateScores: return "DegenerateScores";
        case ErrorCode::DegenerateResponses: return "DegenerateResponses";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::AllRepetitionsFailed: return "AllRepetitionsFailed";
        case ErrorCode::TooFewReplicates: return "TooFewReplicates";
        case ErrorCode::TooManyFailedReplicates: return "TooManyFailedReplicates";
        case ErrorCode::TooManyFailedSimulations: return "TooManyFailedSimulations";
        case ErrorCode::UnknownSetting: return "UnknownSetting";
        case ErrorCode::Parse: return "Parse";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Library-wide exception. `code()` identifies the failure class; `stage()` is
/// set when a pipeline stage rethrows an error it did not originate.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    Error(ErrorCode code, std::string stage, const std::string& message)
        : std::runtime_error("[" + stage + "] " + std::string(to_string(code)) + ": " + message),
          code_(code),
          stage_(std::move(stage)),
          message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }
    // Message without the code and stage prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string stage_;
    std::string message_;
};

}  // namespace cmpcurve
