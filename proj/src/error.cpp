#include "mtbandit/error.hpp"

namespace mtbandit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidShape: return "INVALID_SHAPE";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kUnknownArm: return "UNKNOWN_ARM";
    case ErrorCode::kUnknownTask: return "UNKNOWN_TASK";
    case ErrorCode::kUnknownAction: return "UNKNOWN_ACTION";
    case ErrorCode::kRankDeficient: return "RANK_DEFICIENT";
    case ErrorCode::kNoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::kEmptyTargets: return "EMPTY_TARGETS";
    case ErrorCode::kSingularCovariance: return "SINGULAR_COVARIANCE";
    case ErrorCode::kNTooSmall: return "N_TOO_SMALL";
    case ErrorCode::kRoundingFailed: return "ROUNDING_FAILED";
    case ErrorCode::kSingularBatch: return "SINGULAR_BATCH";
    case ErrorCode::kSingularRealizedGram: return "SINGULAR_REALIZED_GRAM";
    case ErrorCode::kSingularReducedGram: return "SINGULAR_REDUCED_GRAM";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kPhaseCapReached: return "PHASE_CAP_REACHED";
    case ErrorCode::kAssumption3Violated: return "ASSUMPTION3_VIOLATED";
    case ErrorCode::kConfigInvalid: return "CONFIG_INVALID";
  }
  return "UNKNOWN";
}

}  // namespace mtbandit
