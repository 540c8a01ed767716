#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rforge/corpus.hpp"
#include "rforge/rationale.hpp"

namespace rforge {

enum class Method { kLabelOnly, kReason, kExplain, kMix, kAlign };
enum class Stream { kLabel, kRationale, kReasonConcat, kExplainConcat };

std::string_view to_string(Method method);
std::string_view to_string(Stream stream);
Method parse_method(std::string_view s);
Stream parse_stream(std::string_view s);
const std::vector<Method>& all_methods();

struct TrainingExample {
  std::string sample_id;
  Method method = Method::kLabelOnly;
  Stream stream = Stream::kLabel;
  std::string instruction;
  std::string input;
  std::string target;
  std::optional<std::string> batch_id;

  bool operator==(const TrainingExample&) const = default;
};

json example_to_json(const TrainingExample& example);
TrainingExample example_from_json(const json& j);

// The three instruction shapes. Mix and Align reuse label_only for the label
// stream and reason for the rationale stream.
enum class TemplateKind { kLabelOnly, kReason, kExplain };
std::string_view to_string(TemplateKind kind);

// Instruction templates keyed by (dataset, kind), with per-language
// fallbacks under the dataset name "*". Placeholders: {instruction} (the
// dataset's task sentence), {choices} (label space as prose) and {prefix}
// (the answer-sentence prefix).
class TemplateRegistry {
 public:
  // Registry preloaded with the default English and Chinese templates.
  static TemplateRegistry with_defaults();

  void add(const std::string& dataset, Language language, TemplateKind kind, std::string text);
  // Throws kMissingTemplate when neither the dataset nor the fallback has one.
  const std::string& lookup(const DatasetSpec& spec, TemplateKind kind) const;
  // SHA-256 of every registered template, keyed "dataset/lang/kind".
  std::map<std::string, std::string> checksums() const;

 private:
  std::map<std::string, std::string> templates_;
};

std::string render_instruction(const DatasetSpec& spec, TemplateKind kind,
                               const TemplateRegistry& registry);
// Instruction of the example a method emits first (label stream for mix/align).
std::string render_instruction(const DatasetSpec& spec, Method method,
                               const TemplateRegistry& registry);

// Input text; Reason-style inputs end with a step-by-step cue.
std::string render_example_input(const Sample& sample, const DatasetSpec& spec,
                                 bool step_by_step);

// Rationale body with any closing answer sentence removed.
std::string normalized_rationale(std::string_view rationale_text);

// Emits the examples of `method`, ordered by (sample_id, stream).
// label_only -> 1 per sample; reason / explain -> 1 concatenated example;
// mix / align -> label and rationale streams. Align examples carry
// batch_id "align-<sample_id>". Throws kMissingRationale when a sample has no
// accepted rationale and the method needs one.
std::vector<TrainingExample> emit_examples(std::span<const Sample> samples,
                                           const std::map<std::string, RationaleRecord>& rationales,
                                           const DatasetSpec& spec, Method method,
                                           const TemplateRegistry& registry);

struct Batch {
  std::string id;
  std::vector<TrainingExample> examples;
};

// Pools the examples, orders them by (sample_id, stream), shuffles with
// `seed` and cuts batches of `batch_size` (the last may be short). Throws
// kInvalidBatch when batch_size is 0.
std::vector<Batch> assemble_mix_batches(std::span<const TrainingExample> examples,
                                        std::size_t batch_size, std::uint64_t seed);

// One batch per batch_id holding exactly its label and rationale streams;
// with pairs_per_batch > 1, consecutive pairs (by batch_id) share a physical
// batch while each example keeps its own pair id. Throws kUnpairedStream.
std::vector<Batch> assemble_align_batches(std::span<const TrainingExample> examples,
                                          std::size_t pairs_per_batch = 1);

// Sets batch_id on each example from its mix batch.
void assign_mix_batch_ids(std::vector<TrainingExample>& examples,
                          std::span<const Batch> batches);

std::filesystem::path training_file(const std::filesystem::path& dir, Method method);
void write_examples(const std::filesystem::path& path, std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_examples(const std::filesystem::path& path);

}  // namespace rforge
