#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rforge {

using json = nlohmann::json;

enum class LossStream { kLabel, kRationale };

std::string_view to_string(LossStream stream);
LossStream parse_loss_stream(std::string_view s);

struct TokenLossItem {
  std::string sample_id;
  LossStream stream = LossStream::kLabel;
  std::vector<double> token_losses;  // non-empty, finite, >= 0
};

struct TokenLossBatch {
  std::vector<TokenLossItem> items;

  std::size_t size() const { return items.size(); }
  // Throws kInvalidBatch on an empty token sequence or a negative or
  // non-finite loss.
  void validate() const;
};

struct CoefficientPair {
  double lambda_label = 0.5;

  double lambda_rationale() const { return 1.0 - lambda_label; }
  // Throws kInvalidBatch unless 0 <= lambda <= 1.
  static CoefficientPair make(double lambda_label);
};

// Correctly rounded sum of a sequence of doubles (Shewchuk partials), so the
// result does not depend on the order of the terms.
class ExactSum {
 public:
  void add(double x);
  double value() const;

 private:
  std::vector<double> partials_;
};

struct StreamTotals {
  double label_sum = 0.0;
  double rationale_sum = 0.0;
  double total_sum = 0.0;
  std::size_t label_tokens = 0;
  std::size_t rationale_tokens = 0;
};

StreamTotals stream_totals(const TokenLossBatch& batch);

// Sum of every token loss over the whole batch divided by the total token
// count, regardless of stream. Throws kEmptyBatch.
double loss_mix(const TokenLossBatch& batch);

// lambda * L_label + (1 - lambda) * L_rationale, each stream averaged over
// its own tokens. A stream whose coefficient is zero may be absent; otherwise
// throws kMissingStream.
double loss_align(const TokenLossBatch& batch, const CoefficientPair& coeff);

// The unit-weight form L_label + L_rationale (= 2 * loss_align at 0.5).
double loss_align_unit_weight(const TokenLossBatch& batch);

// Plain double loop over items and tokens; no stream logic.
double flat_sum_oracle(const TokenLossBatch& batch);

struct SweepRow {
  double lambda = 0.0;
  double mean_loss = 0.0;
};

const std::vector<double>& default_lambda_grid();  // {0, 0.25, 0.5, 0.75, 1}

// Mean of loss_align over `batches` for each lambda.
std::vector<SweepRow> coefficient_sweep(std::span<const TokenLossBatch> batches,
                                        std::span<const double> lambdas);

TokenLossBatch batch_from_json(const json& j);
json batch_to_json(const TokenLossBatch& batch);

// loss-check input: {"batches": [batch...], "lambdas": [...]} or a single
// batch object {"items": [...]}. Returns the report document.
json loss_check(const json& input);

}  // namespace rforge
