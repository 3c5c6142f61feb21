#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace varcurve {

enum class ErrorCode {
  InvalidArgument,
  SingularMatrix,
  NotIrreducible,
  NumericalFailure,
  StepSizeUnderflow,
  NoClosedFormLST,
  NonConvergence,
  UnstableQueue,
  MissingThirdMoment,
  DegenerateDistribution,
  UnsamplableSpec,
  InsufficientPoints,
  ParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NoClosedFormLST: return "NoClosedFormLST";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::UnstableQueue: return "UnstableQueue";
    case ErrorCode::MissingThirdMoment: return "MissingThirdMoment";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::UnsamplableSpec: return "UnsamplableSpec";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace varcurve
