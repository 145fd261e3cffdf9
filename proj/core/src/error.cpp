#include "qrk/error.hpp"

namespace qrk {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::DegenerateRow: return "DegenerateRow";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SubsampleTooLarge: return "SubsampleTooLarge";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SideMismatch: return "SideMismatch";
    case ErrorCode::MissingOracle: return "MissingOracle";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyCurves: return "EmptyCurves";
  }
  return "Unknown";
}

}  // namespace qrk
