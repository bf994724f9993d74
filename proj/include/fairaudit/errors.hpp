#pragma once

#include <stdexcept>
#include <string>

namespace fairaudit {

/// Stable error codes surfaced through exceptions. The audit layer turns
/// these into skipped-with-error test entries; the CLI maps them to exit 1.
enum class ErrorCode {
    MissingColumn,
    MissingValue,
    NonBinaryProtected,
    NonBinaryLabel,
    NonBinaryDecision,
    UnparsableNumeric,
    EmptyGroup,
    DegenerateSplit,
    UnknownColumn,
    NonNumericQuantileColumn,
    AllStrataSkipped,
    RankDeficientDesign,
    InsufficientNeighbors,
    ConstantFeature,
    SingleClassLabel,
    NonFiniteLoss,
    UnknownLevel,
    MissingFeature,
    NonPositiveCost,
    EmptyCell,
    NotEnoughCandidates,
    MissingPositives,
    InvalidParam,
    InvalidConfig,
    InvalidOutcome,
    InvalidSchema,
    InvalidReport,
    UnknownFormat,
    UnknownVersion,
    IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace fairaudit
