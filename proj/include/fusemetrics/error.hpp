#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusemetrics {

enum class ErrorCode {
  IoError,
  FormatError,
  RangeError,
  TooSmall,
  DimMismatch,
  DegenerateInput,
  AllDegenerate,
  EmptyDataset,
  NonFiniteLoss,
  EnvOutOfRange,
  DegenerateRange,
  TooFewMethods,
  NonFiniteScore,
  LengthMismatch,
  NotAPermutation,
  UnknownColumn,
  LayoutError,
  MissingArtifact,
  ParseError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every hard failure in the library is reported through this type. Soft
// failures (degenerate inputs that still have a defined score) are returned
// as flags next to the value instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fusemetrics
