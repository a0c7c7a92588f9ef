#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rrph {

enum class ErrorCode {
  NegativeEntry,
  RowSumExceedsOne,
  InitialNotNormalized,
  AbsorptionNotGuaranteed,
  DimensionMismatch,
  InvalidN,
  InvalidParameter,
  DimensionTooSmall,
  ZeroRewardProbability,
  DivergentSeries,
  SingularResolvent,
  OutOfMemoryBudget,
  ZeroLikelihoodObservation,
  DegenerateCounts,
  RankDeficientDesign,
  NonConvergence,
  NonMonotoneLikelihood,
  StepCapExceeded,
  BudgetExceeded,
  InvalidInput,
};

std::string_view to_string(ErrorCode code);

// Every library failure carries a code so callers (the CLI in particular)
// can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rrph
