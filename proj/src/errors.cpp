#include "fairaudit/errors.hpp"

namespace fairaudit {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::MissingValue: return "MissingValue";
        case ErrorCode::NonBinaryProtected: return "NonBinaryProtected";
        case ErrorCode::NonBinaryLabel: return "NonBinaryLabel";
        case ErrorCode::NonBinaryDecision: return "NonBinaryDecision";
        case ErrorCode::UnparsableNumeric: return "UnparsableNumeric";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::DegenerateSplit: return "DegenerateSplit";
        case ErrorCode::UnknownColumn: return "UnknownColumn";
        case ErrorCode::NonNumericQuantileColumn: return "NonNumericQuantileColumn";
        case ErrorCode::AllStrataSkipped: return "AllStrataSkipped";
        case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
        case ErrorCode::InsufficientNeighbors: return "InsufficientNeighbors";
        case ErrorCode::ConstantFeature: return "ConstantFeature";
        case ErrorCode::SingleClassLabel: return "SingleClassLabel";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::UnknownLevel: return "UnknownLevel";
        case ErrorCode::MissingFeature: return "MissingFeature";
        case ErrorCode::NonPositiveCost: return "NonPositiveCost";
        case ErrorCode::EmptyCell: return "EmptyCell";
        case ErrorCode::NotEnoughCandidates: return "NotEnoughCandidates";
        case ErrorCode::MissingPositives: return "MissingPositives";
        case ErrorCode::InvalidParam: return "InvalidParam";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidOutcome: return "InvalidOutcome";
        case ErrorCode::InvalidSchema: return "InvalidSchema";
        case ErrorCode::InvalidReport: return "InvalidReport";
        case ErrorCode::UnknownFormat: return "UnknownFormat";
        case ErrorCode::UnknownVersion: return "UnknownVersion";
        case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace fairaudit
