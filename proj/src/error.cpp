#include "rrph/error.hpp"

namespace rrph {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::RowSumExceedsOne: return "RowSumExceedsOne";
    case ErrorCode::InitialNotNormalized: return "InitialNotNormalized";
    case ErrorCode::AbsorptionNotGuaranteed: return "AbsorptionNotGuaranteed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidN: return "InvalidN";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::ZeroRewardProbability: return "ZeroRewardProbability";
    case ErrorCode::DivergentSeries: return "DivergentSeries";
    case ErrorCode::SingularResolvent: return "SingularResolvent";
    case ErrorCode::OutOfMemoryBudget: return "OutOfMemoryBudget";
    case ErrorCode::ZeroLikelihoodObservation: return "ZeroLikelihoodObservation";
    case ErrorCode::DegenerateCounts: return "DegenerateCounts";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NonMonotoneLikelihood: return "NonMonotoneLikelihood";
    case ErrorCode::StepCapExceeded: return "StepCapExceeded";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

}  // namespace rrph
