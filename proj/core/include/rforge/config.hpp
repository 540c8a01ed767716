#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rforge/emit.hpp"
#include "rforge/evalsuite.hpp"
#include "rforge/rationale.hpp"

namespace rforge {

using json = nlohmann::json;

struct DatasetSource {
  std::filesystem::path spec;       // DatasetSpec JSON
  std::filesystem::path records;    // raw JSONL records
  std::filesystem::path exemplars;  // optional exemplar bank
};

// kind "http" talks to `endpoint`; kind "mock" uses the offline stand-ins.
struct ProviderConfig {
  std::string name;
  std::string kind = "http";
  std::string model;
  HttpEndpoint endpoint;
};

struct EmbeddingConfig {
  std::string kind = "http";  // http | hashing
  std::string model;
  std::size_t dim = 64;       // hashing only
  HttpEndpoint endpoint;
  std::size_t batch_size = 32;
};

// Whether clustering caps run before LLM-judge cleaning (curate -> judge) or
// after it (judge -> curate).
enum class CleaningOrder { kClusterFirst, kJudgeFirst };

struct SeedConfig {
  std::uint64_t split = 1;
  std::uint64_t cluster = 2;
  std::uint64_t judge = 3;
  std::uint64_t criteria = 4;
  std::uint64_t mix = 5;
  std::uint64_t audit = 6;
  std::uint64_t review = 7;
  std::uint64_t losses = 8;

  // Replaces every named seed with one derived from `base` and its name.
  void override_with(std::uint64_t base);
  json to_json() const;
};

struct ReviewConfig {
  std::string host = "127.0.0.1";
  int port = 8765;
  std::string token;
  std::filesystem::path static_dir;
  std::size_t annotators_per_task = 1;
  std::size_t audit_size = 500;
  double recollection_fraction = 0.2;
  // Base set the recollection fraction applies to: "unaudited" (queue minus
  // the audit sample) or "queue" (the whole review queue).
  std::string recollection_base = "unaudited";
  std::filesystem::path outcomes;  // review_outcomes.jsonl to import, optional
  std::filesystem::path rewrites;  // rationale_rewrites.jsonl to import, optional
};

struct ConcurrencyConfig {
  std::size_t embedding = 4;
  std::size_t judge = 4;
  std::size_t generator = 4;
  std::size_t inference = 4;
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // directory relative paths resolve against
  json document;                   // the interpolated source document
  std::vector<DatasetSource> datasets;

  EmbeddingConfig embedding;
  std::vector<ProviderConfig> judges;
  std::string primary_judge;
  ProviderConfig generator;
  std::optional<ProviderConfig> inference;
  RetryPolicy retry;

  SeedConfig seeds;
  std::size_t train_cap = 25000;
  std::size_t eval_divisor = 8;
  CleaningOrder cleaning_order = CleaningOrder::kClusterFirst;

  double criteria_fraction = 0.2;
  DesignKind base_design = DesignKind::kWithLabel;
  FilterConfig filter;
  std::string tokenizer_vocab;

  std::vector<Method> methods = all_methods();
  std::size_t mix_batch_size = 8;
  std::size_t align_pairs_per_batch = 1;
  std::vector<double> lambda_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::filesystem::path loss_input;  // TokenLossBatch JSON, optional

  // Rationalize also outputs the label first, so performance runs default to
  // direct and cot; rationalize can be added for rationale analysis.
  std::vector<InferenceMode> eval_modes = {InferenceMode::kDirect, InferenceMode::kCot};
  std::filesystem::path predictions_dir;  // <dir>/<dataset>/<method>.jsonl, optional

  ConcurrencyConfig concurrency;
  ReviewConfig review;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

// Replaces ${NAME} with the environment variable's value in every string of
// the document. Throws kInvalidConfig naming the field when one is unset.
json interpolate_env(const json& doc);

// Parses and validates. Errors are kInvalidConfig with the field path, e.g.
// "providers.judges: exactly 3 judges required".
PipelineConfig parse_config(const json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// Checks the invariants: exactly three judges with unique names, primary
// among them, criteria_fraction and every lambda in [0, 1], non-zero caps.
void validate_config(const PipelineConfig& config);

}  // namespace rforge
