#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wavecorr {

enum class ErrorCode {
  InvalidArgument,
  SeriesTooShort,
  NonFiniteInput,
  MalformedDecomposition,
  InsufficientCoefficients,
  ShapeMismatch,
  DegenerateVariance,
  DegenerateInput,
  TooFewScales,
  EmptyCell,
  DegenerateData,
  NonConvergence,
  SingularQ,
  IndexOutOfRange,
  TooFewObservations,
  UnsynchronizedInput,
  ConstantSeries,
  SingularMoment,
  TooShort,
  SubsampleTooShort,
  ParseError,
  NonMonotoneTimestamps,
  NonPositivePrice,
  EmptyIntersection,
  DegenerateSeries,
  InvalidParameters,
  InvalidBreakIndex,
  UnattainableTarget,
  IoError,
  Usage,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::MalformedDecomposition: return "MalformedDecomposition";
    case ErrorCode::InsufficientCoefficients: return "InsufficientCoefficients";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewScales: return "TooFewScales";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularQ: return "SingularQ";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::UnsynchronizedInput: return "UnsynchronizedInput";
    case ErrorCode::ConstantSeries: return "ConstantSeries";
    case ErrorCode::SingularMoment: return "SingularMoment";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::SubsampleTooShort: return "SubsampleTooShort";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonMonotoneTimestamps: return "NonMonotoneTimestamps";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::InvalidBreakIndex: return "InvalidBreakIndex";
    case ErrorCode::UnattainableTarget: return "UnattainableTarget";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code. Every fallible operation in
/// the library throws this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace wavecorr
