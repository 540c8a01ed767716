#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rforge {

// Every failure the toolkit reports carries one of these codes. The CLI maps
// them onto process exit codes (see exit_code_for).
enum class ErrorCode {
  // corpus
  kUnknownLabel,
  kMissingField,
  kMixedSplitMarkers,
  kInvalidRecord,
  // curate
  kKTooLarge,
  kDimensionMismatch,
  // judge
  kInsufficientExemplars,
  kJudgeUnavailable,
  kMissingVerdict,
  // rationale
  kMissingCriteria,
  kMissingExemplars,
  kTokenizerLoadFailure,
  // emit
  kMissingTemplate,
  kMissingRationale,
  kUnpairedStream,
  // losskernel
  kEmptyBatch,
  kMissingStream,
  kInvalidBatch,
  // evalsuite
  kLengthMismatch,
  kEmptyScoreSet,
  kParseProviderUnavailable,
  // review
  kMalformedTask,
  kKindMismatch,
  kTaskClosed,
  kTaskNotFound,
  // pipeline
  kInvalidConfig,
  kStageDependencyMissing,
  kNoEvalOutputs,
  kValidationFailed,
  kProviderFailure,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// 2 validation, 3 provider failure, 4 dependency missing, 1 anything else.
int exit_code_for(ErrorCode code);

}  // namespace rforge
