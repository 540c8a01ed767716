#include "rforge/error.hpp"

namespace rforge {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kMixedSplitMarkers: return "MixedSplitMarkers";
    case ErrorCode::kInvalidRecord: return "InvalidRecord";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInsufficientExemplars: return "InsufficientExemplars";
    case ErrorCode::kJudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::kMissingVerdict: return "MissingVerdict";
    case ErrorCode::kMissingCriteria: return "MissingCriteria";
    case ErrorCode::kMissingExemplars: return "MissingExemplars";
    case ErrorCode::kTokenizerLoadFailure: return "TokenizerLoadFailure";
    case ErrorCode::kMissingTemplate: return "MissingTemplate";
    case ErrorCode::kMissingRationale: return "MissingRationale";
    case ErrorCode::kUnpairedStream: return "UnpairedStream";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kMissingStream: return "MissingStream";
    case ErrorCode::kInvalidBatch: return "InvalidBatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyScoreSet: return "EmptyScoreSet";
    case ErrorCode::kParseProviderUnavailable: return "ParseProviderUnavailable";
    case ErrorCode::kMalformedTask: return "MalformedTask";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kTaskClosed: return "TaskClosed";
    case ErrorCode::kTaskNotFound: return "TaskNotFound";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kStageDependencyMissing: return "StageDependencyMissing";
    case ErrorCode::kNoEvalOutputs: return "NoEvalOutputs";
    case ErrorCode::kValidationFailed: return "ValidationFailed";
    case ErrorCode::kProviderFailure: return "ProviderFailure";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kJudgeUnavailable:
    case ErrorCode::kProviderFailure:
    case ErrorCode::kParseProviderUnavailable:
      return 3;
    case ErrorCode::kStageDependencyMissing:
    case ErrorCode::kNoEvalOutputs:
      return 4;
    case ErrorCode::kIo:
      return 1;
    default:
      return 2;
  }
}

}  // namespace rforge
