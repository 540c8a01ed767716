#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rforge/corpus.hpp"
#include "rforge/judge.hpp"
#include "rforge/rationale.hpp"

namespace rforge {

using json = nlohmann::json;

enum class ReviewKind { kLabelAccuracy, kRationaleRewrite, kQualityScoring, kPairwiseCompare };
enum class TaskStatus { kOpen, kDone };

std::string_view to_string(ReviewKind kind);
std::string_view to_string(TaskStatus status);
// Throws kMalformedTask.
ReviewKind parse_review_kind(std::string_view s);
TaskStatus parse_task_status(std::string_view s);

struct RecordedVerdict {
  json verdict;
  std::string annotator;
  std::string timestamp;
};

struct ReviewTask {
  std::string id;
  ReviewKind kind = ReviewKind::kLabelAccuracy;
  json payload = json::object();
  TaskStatus status = TaskStatus::kOpen;
  std::vector<RecordedVerdict> verdicts;
  // Server-side data never shown to annotators (the model behind each side
  // of a pairwise task).
  json hidden = json::object();

  // {id, kind, status, payload}; what the HTTP API serves.
  json public_json() const;
};

// Task builders. Payload shapes:
//   label_accuracy:    {sample_id, dataset, input, original_label, judge_prediction, label_space}
//   rationale_rewrite: {sample_id, input, label, rationale}
//   quality_scoring:   {sample_id, input, label, rationale, rubric}
//   pairwise_compare:  {sample_id, input, label, left, right, placement_seed}
ReviewTask make_label_task(const Sample& sample, const DatasetSpec& spec,
                           const JudgeVerdict& verdict);
ReviewTask make_rewrite_task(const Sample& sample, const DatasetSpec& spec,
                             const RationaleRecord& record);
ReviewTask make_quality_task(const Sample& sample, const DatasetSpec& spec,
                             const std::string& rationale, const std::string& source);
// Left/right placement is drawn from `seed` and the sample id; the models
// are kept in ReviewTask::hidden.
ReviewTask make_pairwise_task(const Sample& sample, const DatasetSpec& spec,
                              const std::string& rationale_a, const std::string& model_a,
                              const std::string& rationale_b, const std::string& model_b,
                              std::uint64_t seed);

// Throws kMalformedTask: empty id or payload, missing kind-specific fields,
// or a pairwise payload naming a model.
void validate_task(const ReviewTask& task);

// Throws kKindMismatch unless `verdict` has the shape `task` expects:
//   label_accuracy:    {verdict: correct|ambiguous} or {verdict: wrong, corrected_label}
//   quality_scoring:   {scores: {dimension: 1..5}} for exactly the four per-sample dimensions
//   pairwise_compare:  {preference: win|tie|lose}   (win: left is better)
//   rationale_rewrite: {text: non-empty}
void validate_verdict(const ReviewTask& task, const json& verdict);

struct EnqueueResult {
  std::size_t accepted = 0;
  std::size_t duplicates = 0;
};

struct ExportResult {
  std::vector<std::filesystem::path> files;
  std::map<std::string, std::size_t> counts;  // lines per file name
};

// Task store backed by an append-only JSONL journal; the in-memory index is
// rebuilt from the journal on construction. All operations are serialized.
class ReviewStore {
 public:
  using Clock = std::function<std::string()>;

  // annotators_per_task: verdicts from distinct annotators required before
  // a task closes.
  explicit ReviewStore(std::filesystem::path journal, std::size_t annotators_per_task = 1,
                       Clock clock = {});

  // Idempotent by id: known ids are skipped and counted as duplicates.
  // Validates every task before writing any.
  EnqueueResult enqueue(std::span<const ReviewTask> tasks);

  // Throws kTaskNotFound, kTaskClosed (closed task, or an annotator
  // submitting twice) and kKindMismatch.
  ReviewTask submit_verdict(const std::string& task_id, const json& verdict,
                            const std::string& annotator);

  std::optional<ReviewTask> get(const std::string& id) const;
  // Enqueue order (oldest first), optionally filtered.
  std::vector<ReviewTask> list(std::optional<ReviewKind> kind = std::nullopt,
                               std::optional<TaskStatus> status = std::nullopt) const;
  std::size_t size() const;

  // Writes verdict files for `kind` (all kinds when nullopt) into `dir`:
  //   label_accuracy    -> review_outcomes.jsonl (ReviewOutcome lines)
  //   rationale_rewrite -> rationale_rewrites.jsonl {sample_id, text, annotator, timestamp}
  //   quality_scoring   -> quality_scores.jsonl
  //   pairwise_compare  -> pairwise_outcomes.jsonl
  // plus export_manifest.json with per-file line counts. Output depends only
  // on the recorded verdicts.
  ExportResult export_verdicts(const std::filesystem::path& dir,
                               std::optional<ReviewKind> kind = std::nullopt) const;

 private:
  void apply(const json& entry);
  void append(const json& entry);

  std::filesystem::path journal_;
  std::size_t annotators_per_task_;
  Clock clock_;
  mutable std::mutex mu_;
  std::vector<ReviewTask> tasks_;
  std::map<std::string, std::size_t> index_;
};

// Current UTC time as 2024-01-31T12:00:00Z.
std::string utc_timestamp();

// rationale_rewrites.jsonl -> sample id -> replacement text (last one wins).
std::map<std::string, std::string> read_rewrites(const std::filesystem::path& path);

}  // namespace rforge
