#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rforge/corpus.hpp"
#include "rforge/providers.hpp"
#include "rforge/tokenizer.hpp"

namespace rforge {

inline constexpr double kGenerationTemperature = 0.7;
inline constexpr std::size_t kMaxRationaleTokens = 1024;  // rationale + label must stay below
inline constexpr std::size_t kPromptExemplars = 8;

enum class DesignKind { kOriginal, kWithLabel, kWithLabelExemplars, kWithLabelCriteria };

std::string_view to_string(DesignKind kind);
DesignKind parse_design_kind(std::string_view s);

struct PromptDesign {
  DesignKind kind = DesignKind::kWithLabel;
  std::size_t exemplar_count = 0;  // kPromptExemplars for the exemplar design

  static PromptDesign make(DesignKind kind);
  bool operator==(const PromptDesign&) const = default;
};

enum class RationaleStatus {
  kPending,
  kAccepted,
  kRejectedSafety,
  kRejectedLength,
  kRejectedInconsistent,
  kRewriteQueue,
};

std::string_view to_string(RationaleStatus status);
RationaleStatus parse_rationale_status(std::string_view s);

struct RationaleRecord {
  std::string sample_id;
  PromptDesign design;
  std::string text;
  std::optional<std::string> final_answer;
  RationaleStatus status = RationaleStatus::kPending;
  std::size_t token_count = 0;        // tokens in text
  std::size_t label_token_count = 0;  // tokens in the label
  bool refused = false;               // provider refusal flag
  std::string model;

  bool operator==(const RationaleRecord&) const = default;
};

json record_to_json(const RationaleRecord& record);
RationaleRecord record_from_json(const json& j);

// A demonstration for the exemplar design: a labelled input with a
// hand-written rationale.
struct Exemplar {
  std::map<std::string, std::string> fields;
  std::string label;
  std::string rationale;
};

// Exemplar bank for one dataset, read from JSONL {fields, label, rationale}.
std::vector<Exemplar> load_exemplar_bank(const std::filesystem::path& path);

// Exact-count seeded allocation: ids are sorted, shuffled with `seed`, and
// the first round(criteria_fraction * n) receive the criteria design; the
// rest receive `base`. Datasets without criteria get `base` throughout.
std::map<std::string, PromptDesign> allocate_designs(std::span<const Sample> samples,
                                                     const DatasetSpec& spec,
                                                     double criteria_fraction,
                                                     std::uint64_t seed,
                                                     DesignKind base = DesignKind::kWithLabel);

// Throws kMissingCriteria / kMissingExemplars when the design cannot be built.
std::string build_generation_prompt(const Sample& sample, const DatasetSpec& spec,
                                    const PromptDesign& design,
                                    std::span<const Exemplar> exemplars = {});

ChatRequest build_generation_request(const Sample& sample, const DatasetSpec& spec,
                                     const PromptDesign& design,
                                     std::span<const Exemplar> exemplars,
                                     const std::string& model);

// Generates one pending record per sample, ordered by sample id.
std::vector<RationaleRecord> generate_rationales(
    std::span<const Sample> samples, const DatasetSpec& spec,
    const std::map<std::string, PromptDesign>& designs, std::span<const Exemplar> exemplars,
    ChatClient& client, const std::string& model, std::size_t concurrency);

const std::vector<std::string>& default_leak_keywords();
const std::vector<std::string>& default_refusal_phrases();

struct FilterConfig {
  std::vector<std::string> leak_keywords = default_leak_keywords();
  std::vector<std::string> refusal_phrases = default_refusal_phrases();
  std::size_t max_tokens = kMaxRationaleTokens;
};

// Applies the rules in order and returns the record with its final status:
// safety, length (rationale + label tokens >= max_tokens), inconsistent final
// answer, leak keyword (rewrite queue); otherwise accepted.
RationaleRecord filter_rationale(RationaleRecord record, const Sample& sample,
                                 const DatasetSpec& spec, const Tokenizer& tokenizer,
                                 const FilterConfig& config = {});

struct FilterFunnel {
  std::size_t generated = 0;
  std::size_t accepted = 0;
  std::size_t rejected_safety = 0;
  std::size_t rejected_length = 0;
  std::size_t rejected_inconsistent = 0;
  std::size_t rewrite_queue = 0;

  json to_json() const;
};

FilterFunnel funnel_of(std::span<const RationaleRecord> records);

// Filters every record whose sample is known; throws kInvalidRecord for
// records without a sample.
std::vector<RationaleRecord> filter_all(std::span<const RationaleRecord> records,
                                        std::span<const Sample> samples,
                                        const DatasetSpec& spec, const Tokenizer& tokenizer,
                                        const FilterConfig& config, std::size_t concurrency);

// Replaces the text of rewrite-queue records with human rewrites and runs
// them through the filter again.
std::vector<RationaleRecord> apply_rewrites(std::span<const RationaleRecord> records,
                                            const std::map<std::string, std::string>& rewrites,
                                            std::span<const Sample> samples,
                                            const DatasetSpec& spec, const Tokenizer& tokenizer,
                                            const FilterConfig& config);

}  // namespace rforge
