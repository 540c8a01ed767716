#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rforge/answer.hpp"
#include "rforge/corpus.hpp"
#include "rforge/emit.hpp"
#include "rforge/providers.hpp"

namespace rforge {

enum class InferenceMode { kDirect, kCot, kRationalize };

std::string_view to_string(InferenceMode mode);
InferenceMode parse_inference_mode(std::string_view s);

struct DecodingConfig {
  std::string name;
  double temperature = 0.0;
  std::optional<double> top_p;
};

// direct: greedy only. cot: greedy and sampled (0.7, top_p 0.9), best of the
// two reported. rationalize: greedy.
std::vector<DecodingConfig> decoding_configs(InferenceMode mode);

// Prompt for a fine-tuned model under `mode`: direct uses the label-only
// instruction, cot the reason instruction with the step-by-step cue, and
// rationalize the explain instruction.
ChatRequest build_inference_request(const Sample& sample, const DatasetSpec& spec,
                                    Method method, InferenceMode mode,
                                    const DecodingConfig& decoding,
                                    const TemplateRegistry& registry, const std::string& model);

// Maps model output onto an answer. direct: the whole output; cot: the text
// after the last answer-sentence prefix; rationalize: the leading segment up
// to the first newline or numbered-step marker. Never throws.
std::optional<std::string> parse_answer(std::string_view output, InferenceMode mode,
                                        const AnswerParser& parser);

// Leading answer segment of a rationalize-mode output.
std::string rationalize_segment(std::string_view output);

struct SpanScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Spans match on (type, text); offsets must agree only when both sides carry
// them. Both empty -> (1, 1, 1); empty prediction -> (0, 0, 0).
SpanScore span_f1(std::span<const Span> predicted, std::span<const Span> gold);
std::size_t span_matches(std::span<const Span> predicted, std::span<const Span> gold);

// accuracy: exact-match fraction, unparseable counts wrong. span_f1: micro
// F1 over the dataset (predictions and golds in canonical span text).
// Throws kLengthMismatch.
double score_dataset(std::span<const std::optional<std::string>> predictions,
                     std::span<const std::string> golds, Metric metric);

// Unweighted mean. Throws kEmptyScoreSet.
double macro_average(std::span<const double> scores);

// ---------------------------------------------------------------------------
// Diversity

struct VerbObject {
  std::string verb;
  std::string object;  // empty when the verb has no noun object

  bool operator==(const VerbObject&) const = default;
};

class ParseProvider {
 public:
  virtual ~ParseProvider() = default;
  // Root verb and its noun object for each sentence of `text`. Throws
  // kParseProviderUnavailable when the backend cannot be reached.
  virtual std::vector<VerbObject> parse(const std::string& text) = 0;
  virtual std::string name() const = 0;
};

// Lexicon-driven approximation: the first known verb of each sentence and
// the next content word after it.
class NaiveParseProvider final : public ParseProvider {
 public:
  std::vector<VerbObject> parse(const std::string& text) override;
  std::string name() const override { return "naive-lexicon"; }
};

// POST {text} -> {pairs: [{verb, object}]}.
class HttpParseProvider final : public ParseProvider {
 public:
  explicit HttpParseProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<VerbObject> parse(const std::string& text) override;
  std::string name() const override { return "http:" + endpoint_.url; }

 private:
  HttpEndpoint endpoint_;
};

struct VerbBucket {
  std::string verb;
  std::size_t count = 0;
  std::vector<std::pair<std::string, std::size_t>> objects;  // top objects
};

struct DiversityReport {
  std::vector<VerbBucket> verbs;
  std::string provider;
  bool fallback_used = false;

  json to_json() const;
};

// Histogram of (root verb, noun object) pairs: top `top_verbs` verbs by count
// with their `top_objects` most frequent objects. Ties break
// lexicographically. When `provider` is null or unavailable the fallback is
// used and flagged.
DiversityReport diversity_report(std::span<const std::string> rationales,
                                 ParseProvider* provider, ParseProvider& fallback,
                                 std::size_t top_verbs = 20, std::size_t top_objects = 4);

// ---------------------------------------------------------------------------
// CoT error annotation

enum class ErrorType { kUnderstanding, kLogical, kContext, kLinguistic };

std::string_view to_string(ErrorType type);
ErrorType parse_error_type(std::string_view s);  // throws kInvalidRecord

struct ErrorAnnotation {
  std::string case_id;
  ErrorType error_type = ErrorType::kUnderstanding;
  std::string annotator;
  std::string note;

  bool operator==(const ErrorAnnotation&) const = default;
};

json annotation_to_json(const ErrorAnnotation& a);
ErrorAnnotation annotation_from_json(const json& j);
std::vector<ErrorAnnotation> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       std::span<const ErrorAnnotation> annotations);
// Count per error type, all four keys present.
std::map<std::string, std::size_t> error_distribution(std::span<const ErrorAnnotation> a);

// ---------------------------------------------------------------------------
// Predictions and scoring

struct Prediction {
  std::string sample_id;
  InferenceMode mode = InferenceMode::kDirect;
  std::string output_text;
  std::string run = "greedy";  // decoding configuration name
};

json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const json& j);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

struct ScoreCell {
  std::string task;
  std::string dataset;
  std::string method;
  InferenceMode mode = InferenceMode::kDirect;
  std::map<std::string, double> runs;  // per decoding run
  double score = 0.0;                  // best run
  std::size_t n = 0;
  std::size_t unparseable = 0;         // in the best run
};

// Scores one dataset's predictions for one method against the gold labels of
// `test`. Predictions are grouped by (mode, run); a gold sample without a
// prediction counts as wrong.
std::vector<ScoreCell> score_predictions(std::span<const Prediction> predictions,
                                         std::span<const Sample> test, const DatasetSpec& spec,
                                         const std::string& method);

struct MacroCell {
  std::string task;
  std::string method;
  InferenceMode mode = InferenceMode::kDirect;
  double score = 0.0;
  std::size_t datasets = 0;
};

std::vector<MacroCell> macro_by_task(std::span<const ScoreCell> cells);

// {per_dataset: [...], macro: [...], counts: {...}}
json eval_report_json(std::span<const ScoreCell> cells);

}  // namespace rforge
