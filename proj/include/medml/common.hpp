#pragma once

#include <stdexcept>
#include <string>

namespace medml {

// Error taxonomy shared across the library. Each rejectable condition carries
// its own code so callers (CLI, tests) can branch without string matching.
enum class ErrorCode {
  LengthMismatch,
  NonBinaryColumn,
  NonFiniteCovariate,
  EmptyArm,
  EmptyCell,
  TooFewObservations,
  OneClassOnly,
  DimensionMismatch,
  DisjointnessViolated,
  InconsistentFolds,
  EmptyRetainedSet,
  ZeroSe,
  NumericalOverflow,
  FileNotFound,
  ParseError,
  InvalidConfig,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonBinaryColumn: return "NonBinaryColumn";
    case ErrorCode::NonFiniteCovariate: return "NonFiniteCovariate";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DisjointnessViolated: return "DisjointnessViolated";
    case ErrorCode::InconsistentFolds: return "InconsistentFolds";
    case ErrorCode::EmptyRetainedSet: return "EmptyRetainedSet";
    case ErrorCode::ZeroSe: return "ZeroSe";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace medml
