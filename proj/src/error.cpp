#include "mdspline/error.hpp"

namespace mdspline {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::InvalidKnots: return "InvalidKnots";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::NotMonotone: return "NotMonotone";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::UnsupportedNu: return "UnsupportedNu";
    case ErrorCode::CholeskyFailure: return "CholeskyFailure";
    case ErrorCode::FitFailure: return "FitFailure";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace mdspline
