#include "hypstruct/error.hpp"

namespace hypstruct {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MixedCurvature: return "MixedCurvature";
    case ErrorCode::OutsideBall: return "OutsideBall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NotALeaf: return "NotALeaf";
    case ErrorCode::InvalidLevelCounts: return "InvalidLevelCounts";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::InsufficientVertices: return "InsufficientVertices";
    case ErrorCode::UnnormalizedInput: return "UnnormalizedInput";
    case ErrorCode::ClassWithoutPositive: return "ClassWithoutPositive";
    case ErrorCode::NonDifferentiablePoint: return "NonDifferentiablePoint";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::TemplateMismatch: return "TemplateMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::DegenerateRow: return "DegenerateRow";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ZeroDiameter: return "ZeroDiameter";
    case ErrorCode::SingularAfterRegularization: return "SingularAfterRegularization";
    case ErrorCode::MissingEntry: return "MissingEntry";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace hypstruct
