#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace rforge {

using json = nlohmann::json;

enum class TaskFamily {
  kSentiment,
  kStance,
  kNli,
  kParaphrase,
  kCoreference,
  kReadingComprehension,
  kTopic,
  kRcCommonSense,
  kCommonSense,
  kLinguistics,
  kNer,
};

enum class Metric { kAccuracy, kSpanF1 };
enum class Language { kZh, kEn };
enum class Split { kTrain, kDev, kTest, kUnassigned };

std::string_view to_string(TaskFamily family);
std::string_view to_string(Metric metric);
std::string_view to_string(Language language);
std::string_view to_string(Split split);
TaskFamily parse_task_family(std::string_view s);
Language parse_language(std::string_view s);
// Accepts train/dev/validation/valid/test/unassigned.
Split parse_split(std::string_view s);

struct TaskKind {
  TaskFamily family = TaskFamily::kSentiment;
  Metric metric = Metric::kAccuracy;

  // NER and span-extraction reading comprehension score with span F1,
  // everything else with accuracy.
  static TaskKind make(TaskFamily family, bool span_extraction = false);
};

// Offsets are [begin, end) in Unicode scalar values.
struct Span {
  std::string type;
  std::string text;
  std::optional<std::pair<std::size_t, std::size_t>> offsets;

  bool operator==(const Span&) const = default;
};

using Label = std::variant<std::string, std::vector<Span>>;

bool is_span_label(const Label& label);
// Canonical single-string rendering. Span lists render as
// "TYPE:text; TYPE:text"; parse_span_text is the inverse (offsets dropped).
std::string label_text(const Label& label);
std::vector<Span> parse_span_text(std::string_view text);

struct DatasetSpec {
  std::string name;
  TaskKind task;
  Language language = Language::kZh;
  std::vector<std::string> label_space;          // empty for span extraction
  std::map<std::string, std::string> criteria;   // label -> judge criteria
  std::vector<std::string> input_schema;         // field names, display order
  std::map<std::string, std::string> field_display;  // field -> "Question 1"
  std::string instruction;  // task sentence, e.g. "Determine the Relationship ..."
  std::string label_name;   // e.g. "Relationship"
  std::string description;  // optional expert preamble for generation prompts

  bool is_span_task() const { return label_space.empty(); }
  bool has_label(std::string_view label) const;
  std::string display_name(const std::string& field) const;

  // Throws kInvalidRecord on duplicate labels, criteria keys outside the
  // label space, or an empty schema.
  void validate() const;
};

void to_json(json& j, const DatasetSpec& spec);
void from_json(const json& j, DatasetSpec& spec);
DatasetSpec load_dataset_spec(const std::filesystem::path& path);

struct Sample {
  std::string id;
  std::string dataset;
  std::map<std::string, std::string> fields;
  Label label;
  Split split = Split::kUnassigned;

  bool operator==(const Sample&) const = default;
};

json sample_to_json(const Sample& sample);
Sample sample_from_json(const json& j);

// Field names sorted, values NFC-normalized and trimmed, joined with
// unit/record separators: name 0x1F value 0x1E ...
std::string canonical_form(const std::map<std::string, std::string>& fields);
// First 16 hex digits of SHA-256 over canonical_form.
std::string sample_id_for(const std::map<std::string, std::string>& fields);

// Input text of a sample in schema order, one "Display: value" per line.
std::string render_input(const Sample& sample, const DatasetSpec& spec);

// Label space as prose: "Matched or Unmatched", "A, B, C or D";
// "匹配或者不匹配", "A、B、C或者D" for Chinese datasets.
std::string label_choices(const DatasetSpec& spec);
// spec.label_name, or "Label" / "标签".
std::string label_name(const DatasetSpec& spec);
// spec.instruction, or a generic "Determine the <label name> ..." sentence.
std::string task_instruction(const DatasetSpec& spec);
// Trimmed text with a full stop appended unless it already ends in one.
std::string as_sentence(std::string_view text, Language language);

std::vector<Sample> ingest_dataset(std::span<const json> raw_records,
                                   const DatasetSpec& spec);

// Returns one split per input sample. Original markers are kept verbatim;
// otherwise samples are ordered by id, shuffled with `seed`, and cut 8:1:1
// with dev = test = floor(n / 10) and the remainder in train.
std::vector<Split> split_dataset(std::span<const Sample> samples, std::uint64_t seed);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};
SplitCounts split_counts(std::size_t n);

enum class IssueKind { kSplitLeakage, kLabelViolation, kEmptySplit };

struct ValidationIssue {
  IssueKind kind;
  std::string sample_id;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::size_t count(IssueKind kind) const;
};

ValidationReport validate_collection(std::span<const Sample> collection,
                                     const DatasetSpec& spec);
// Throws kValidationFailed listing the issues when the report is not ok.
void require_valid(const ValidationReport& report, std::string_view dataset);

// <dir>/<dataset>/{train,dev,test}.jsonl and <dir>/<dataset>/spec.json.
void write_collection(const std::filesystem::path& dir, const DatasetSpec& spec,
                      std::span<const Sample> samples);
std::vector<Sample> read_collection(const std::filesystem::path& dir,
                                    const std::string& dataset);
std::vector<Sample> read_split(const std::filesystem::path& dir,
                               const std::string& dataset, Split split);

}  // namespace rforge
