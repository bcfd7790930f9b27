#pragma once

#include <stdexcept>
#include <string>

namespace qfix {

// Absolute tolerance for weight, metric and epsilon comparisons.
inline constexpr double kTol = 1e-9;

enum class Errc {
  EmptyPattern,
  ArityMismatch,
  WeightOutOfRange,
  SumExceedsOne,
  ScalarOutOfRange,
  IndexOutOfRange,
  IndicesNotOrdered,
  NotContractive,
  NegativeEpsilon,
  NonpositiveEpsilon,
  SyntaxError,
  UnknownSymbol,
  DuplicateSymbol,
  SlotOutOfRange,
  ShapeMismatch,
  DimensionMismatch,
  GroundNotMetric,
  MassMismatch,
  EmptySet,
  RowNotStochastic,
  RewardOutOfRange,
  EmptyStateSet,
  EmptyActionSet,
  ActionSetMismatch,
  PreconditionViolated,
  ModelEvaluationFailure,
  FileNotFound,
  SchemaViolation,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::EmptyPattern: return "EmptyPattern";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::WeightOutOfRange: return "WeightOutOfRange";
    case Errc::SumExceedsOne: return "SumExceedsOne";
    case Errc::ScalarOutOfRange: return "ScalarOutOfRange";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::IndicesNotOrdered: return "IndicesNotOrdered";
    case Errc::NotContractive: return "NotContractive";
    case Errc::NegativeEpsilon: return "NegativeEpsilon";
    case Errc::NonpositiveEpsilon: return "NonpositiveEpsilon";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownSymbol: return "UnknownSymbol";
    case Errc::DuplicateSymbol: return "DuplicateSymbol";
    case Errc::SlotOutOfRange: return "SlotOutOfRange";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::GroundNotMetric: return "GroundNotMetric";
    case Errc::MassMismatch: return "MassMismatch";
    case Errc::EmptySet: return "EmptySet";
    case Errc::RowNotStochastic: return "RowNotStochastic";
    case Errc::RewardOutOfRange: return "RewardOutOfRange";
    case Errc::EmptyStateSet: return "EmptyStateSet";
    case Errc::EmptyActionSet: return "EmptyActionSet";
    case Errc::ActionSetMismatch: return "ActionSetMismatch";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::ModelEvaluationFailure: return "ModelEvaluationFailure";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace qfix
