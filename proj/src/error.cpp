#include "fusemetrics/error.hpp"

namespace fusemetrics {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::AllDegenerate: return "AllDegenerate";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EnvOutOfRange: return "EnvOutOfRange";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::TooFewMethods: return "TooFewMethods";
    case ErrorCode::NonFiniteScore: return "NonFiniteScore";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotAPermutation: return "NotAPermutation";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::LayoutError: return "LayoutError";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace fusemetrics
