#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtbandit {

enum class ErrorCode {
  kInvalidShape,
  kInvalidArgument,
  kUnknownArm,
  kUnknownTask,
  kUnknownAction,
  kRankDeficient,
  kNoConvergence,
  kEmptyTargets,
  kSingularCovariance,
  kNTooSmall,
  kRoundingFailed,
  kSingularBatch,
  kSingularRealizedGram,
  kSingularReducedGram,
  kShapeMismatch,
  kPhaseCapReached,
  kAssumption3Violated,
  kConfigInvalid,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mtbandit
