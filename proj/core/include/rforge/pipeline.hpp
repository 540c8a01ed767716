#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rforge/config.hpp"
#include "rforge/emit.hpp"

namespace rforge {

using json = nlohmann::json;

enum class Stage {
  kIngest,
  kCurate,
  kJudge,
  kRationaleGen,
  kRationaleFilter,
  kEmit,
  kLossCheck,
  kEval,
  kReviewServe,
  kReport,
};

std::string_view to_string(Stage stage);
// Throws kInvalidConfig for an unknown stage name.
Stage parse_stage(std::string_view s);
// Every stage in run order.
const std::vector<Stage>& all_stages();

struct RunOptions {
  std::filesystem::path workdir;
  bool force = false;
  bool dry_run = false;  // mock every provider
  std::optional<std::uint64_t> seed_override;
  std::optional<Method> method;  // emit only this method
};

struct StageResult {
  Stage stage = Stage::kIngest;
  bool cached = false;  // skipped: inputs unchanged and outputs intact
  json manifest;
};

// Runs stages against a work directory. Every stage writes its outputs under
// <workdir>/<stage>/ and a manifest to <workdir>/manifests/<stage>.json:
//   {stage, input_hash, inputs: {config, parents: {stage: manifest hash}, files},
//    seeds, counts, outputs: {relative path: sha256}, duration_ms}
// A manifest's hash covers everything except duration_ms, and each manifest
// records its parents' hashes, so the manifests form a hash-linked chain.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, RunOptions options);
  ~Pipeline();

  // Throws kStageDependencyMissing when a parent stage has not run,
  // kNoEvalOutputs for report without eval.
  StageResult run(Stage stage);
  // ingest through report, skipping review-serve.
  std::vector<StageResult> run_all();

  // Serves the review queue until `stop` becomes true.
  void serve_review(const std::atomic<bool>& stop, const std::function<void(int)>& on_ready);

  // Chat requests and embedding batches that reached a provider.
  std::size_t provider_calls() const;
  const PipelineConfig& config() const { return config_; }
  const RunOptions& options() const { return options_; }

 private:
  struct Impl;
  PipelineConfig config_;
  RunOptions options_;
  std::unique_ptr<Impl> impl_;
};

// Hash of a manifest over everything except duration_ms.
std::string manifest_hash(const json& manifest);

struct VerifyResult {
  bool ok = true;
  std::vector<std::string> problems;
  std::size_t manifests = 0;
};

// Re-hashes every recorded output and checks each manifest's parent links.
VerifyResult verify_workdir(const std::filesystem::path& workdir);

}  // namespace rforge
