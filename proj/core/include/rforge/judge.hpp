#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rforge/corpus.hpp"
#include "rforge/curate.hpp"
#include "rforge/providers.hpp"

namespace rforge {

inline constexpr std::size_t kJudgeShots = 8;
inline constexpr std::size_t kJudgeCount = 3;

enum class ResolutionKind { kUnanimous, kMajority, kPrimaryTiebreak, kUnresolved };
enum class Disposition { kRetained, kReviewQueue };

std::string_view to_string(ResolutionKind kind);
std::string_view to_string(Disposition disposition);

struct JudgePrediction {
  std::string judge;
  std::optional<std::string> label;  // nullopt: unparseable output (abstention)
  std::string raw;                   // verbatim judge output

  bool operator==(const JudgePrediction&) const = default;
};

struct JudgeVerdict {
  std::string sample_id;
  std::string original_label;  // canonical label text
  std::vector<JudgePrediction> predictions;
  std::optional<std::string> resolved;
  ResolutionKind resolution_kind = ResolutionKind::kUnresolved;
  Disposition disposition = Disposition::kReviewQueue;

  bool operator==(const JudgeVerdict&) const = default;
};

json verdict_to_json(const JudgeVerdict& verdict);
JudgeVerdict verdict_from_json(const json& j);

struct Resolution {
  std::optional<std::string> label;
  ResolutionKind kind = ResolutionKind::kUnresolved;
};

// Majority vote over the non-abstaining predictions: all three agree ->
// unanimous; two agree -> majority; otherwise the primary judge's label
// (primary_tiebreak). When the primary abstains and no two remaining judges
// agree the vote is unresolved.
Resolution resolve_votes(std::span<const JudgePrediction> predictions,
                         std::string_view primary_judge);

// Draws `count` exemplars from `pool` (same dataset), never the target.
// Labels are visited round-robin in label-space order, each label's members
// in a seeded order, so every label is represented when possible.
// Throws kInsufficientExemplars when fewer than `count` candidates exist.
std::vector<Sample> select_exemplars(const Sample& target, std::span<const Sample> pool,
                                     const DatasetSpec& spec, std::uint64_t seed,
                                     std::size_t count = kJudgeShots);

// Asks for the correct label of the target given `exemplars` labelled
// demonstrations. Throws kInsufficientExemplars unless exactly 8 are given.
std::string build_judge_prompt(const Sample& target, std::span<const Sample> exemplars,
                               const DatasetSpec& spec);

// Prompt wrapped in a temperature-0 request for `model`.
ChatRequest build_judge_request(const Sample& target, std::span<const Sample> exemplars,
                                const DatasetSpec& spec, const std::string& model);

// Bare-label answer mapped onto the label space (span text for span tasks).
std::optional<std::string> parse_judge_output(std::string_view output, const DatasetSpec& spec);

struct JudgeClient {
  std::string name;
  std::string model;
  std::shared_ptr<ChatClient> client;
};

// Queries the three judges and resolves their votes. Throws
// kJudgeUnavailable naming the judge when a client fails.
JudgeVerdict adjudicate(const Sample& sample, std::span<const Sample> exemplars,
                        const DatasetSpec& spec, std::span<const JudgeClient> judges,
                        std::string_view primary_judge);

struct JudgeRun {
  std::vector<JudgeVerdict> verdicts;  // ordered by sample id
  std::vector<std::string> deferred;   // sample ids whose judges failed, sorted
  std::vector<std::string> errors;     // one message per deferred sample
};

// Adjudicates every sample; exemplars come from `pool`. Samples whose judges
// are unavailable are deferred rather than dropped.
JudgeRun run_judging(std::span<const Sample> samples, std::span<const Sample> pool,
                     const DatasetSpec& spec, std::span<const JudgeClient> judges,
                     std::string_view primary_judge, std::uint64_t seed,
                     std::size_t concurrency);

struct Partition {
  std::vector<Sample> retained;
  std::vector<Sample> review_queue;
};

// Throws kMissingVerdict when a sample has no verdict.
Partition partition(std::span<const Sample> samples, std::span<const JudgeVerdict> verdicts);

enum class ReviewVerdict { kCorrect, kWrong, kAmbiguous };
std::string_view to_string(ReviewVerdict verdict);
ReviewVerdict parse_review_verdict(std::string_view s);

struct ReviewOutcome {
  std::string sample_id;
  ReviewVerdict verdict = ReviewVerdict::kCorrect;
  std::optional<std::string> corrected_label;  // present iff verdict is wrong
  std::string annotator;
  std::string timestamp;

  bool operator==(const ReviewOutcome&) const = default;
};

json outcome_to_json(const ReviewOutcome& outcome);
// Throws kInvalidRecord when corrected_label presence disagrees with verdict.
ReviewOutcome outcome_from_json(const json& j);
std::vector<ReviewOutcome> read_review_outcomes(const std::filesystem::path& path);

// Uniform seeded draw of up to `size` queued samples for the quality audit.
std::vector<Sample> select_audit(std::span<const Sample> review_queue, std::size_t size,
                                 std::uint64_t seed);

struct AuditSummary {
  std::size_t audited = 0;
  std::size_t correct = 0;
  std::size_t wrong = 0;
  std::size_t ambiguous = 0;
  double correct_fraction = 0.0;
  bool high_quality = false;  // correct_fraction > 0.5
};

AuditSummary summarize_audit(std::span<const ReviewOutcome> outcomes);

struct ReviewApplication {
  std::vector<Sample> corpus;  // retained plus reviewed-and-kept, input order
  std::size_t confirmed = 0;
  std::size_t relabeled = 0;
  std::size_t excluded = 0;  // ambiguous
  std::size_t pending = 0;   // queued without an outcome (left out)
};

// correct keeps the original label, wrong relabels with corrected_label
// (checked against the label space), ambiguous drops the sample. Outcomes
// for the same sample are applied in file order; the last one wins.
ReviewApplication apply_review_outcomes(const Partition& partition,
                                        std::span<const ReviewOutcome> outcomes,
                                        const DatasetSpec& spec);

// Recollection for a high-quality dataset: the k-means representatives of
// round(fraction * |remaining|) of the still-unreviewed queue.
std::vector<Sample> recollection_candidates(std::span<const Sample> remaining,
                                            const VectorTable& vectors, double fraction,
                                            std::uint64_t seed);

}  // namespace rforge
