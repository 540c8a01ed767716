#include "rforge/losskernel.hpp"

#include <cmath>
#include <cstdio>

#include "rforge/error.hpp"

namespace rforge {

std::string_view to_string(LossStream stream) {
  return stream == LossStream::kLabel ? "label" : "rationale";
}

LossStream parse_loss_stream(std::string_view s) {
  if (s == "label") return LossStream::kLabel;
  if (s == "rationale") return LossStream::kRationale;
  throw Error(ErrorCode::kInvalidBatch, "unknown stream '" + std::string(s) + "'");
}

void TokenLossBatch::validate() const {
  for (const auto& item : items) {
    if (item.token_losses.empty()) {
      throw Error(ErrorCode::kInvalidBatch, "item " + item.sample_id + " has no tokens");
    }
    for (double x : item.token_losses) {
      if (!std::isfinite(x) || x < 0.0) {
        throw Error(ErrorCode::kInvalidBatch,
                    "item " + item.sample_id + " has an invalid token loss");
      }
    }
  }
}

CoefficientPair CoefficientPair::make(double lambda_label) {
  if (!(lambda_label >= 0.0 && lambda_label <= 1.0)) {
    throw Error(ErrorCode::kInvalidBatch, "label coefficient must lie in [0, 1]");
  }
  return CoefficientPair{lambda_label};
}

void ExactSum::add(double x) {
  std::size_t i = 0;
  for (double y : partials_) {
    if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
    const double hi = x + y;
    const double lo = y - (hi - x);
    if (lo != 0.0) partials_[i++] = lo;
    x = hi;
  }
  partials_.resize(i);
  partials_.push_back(x);
}

double ExactSum::value() const {
  if (partials_.empty()) return 0.0;
  // Add partials from the most significant down, then fix the final
  // half-way rounding case.
  std::size_t n = partials_.size();
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials_[--n];
    hi = x + y;
    const double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) break;
  }
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    const double yr = x - hi;
    if (y == yr) hi = x;
  }
  return hi;
}

StreamTotals stream_totals(const TokenLossBatch& batch) {
  batch.validate();
  ExactSum label;
  ExactSum rationale;
  ExactSum total;
  StreamTotals t;
  for (const auto& item : batch.items) {
    const bool is_label = item.stream == LossStream::kLabel;
    for (double x : item.token_losses) {
      (is_label ? label : rationale).add(x);
      total.add(x);
    }
    (is_label ? t.label_tokens : t.rationale_tokens) += item.token_losses.size();
  }
  t.label_sum = label.value();
  t.rationale_sum = rationale.value();
  t.total_sum = total.value();
  return t;
}

double loss_mix(const TokenLossBatch& batch) {
  if (batch.items.empty()) throw Error(ErrorCode::kEmptyBatch, "loss_mix on an empty batch");
  const auto t = stream_totals(batch);
  return t.total_sum / static_cast<double>(t.label_tokens + t.rationale_tokens);
}

double loss_align(const TokenLossBatch& batch, const CoefficientPair& coeff) {
  if (batch.items.empty()) throw Error(ErrorCode::kEmptyBatch, "loss_align on an empty batch");
  const auto c = CoefficientPair::make(coeff.lambda_label);
  const auto t = stream_totals(batch);
  const double wl = c.lambda_label;
  const double wr = c.lambda_rationale();
  if (wl != 0.0 && t.label_tokens == 0) {
    throw Error(ErrorCode::kMissingStream, "label stream absent with coefficient " +
                                               std::to_string(wl));
  }
  if (wr != 0.0 && t.rationale_tokens == 0) {
    throw Error(ErrorCode::kMissingStream, "rationale stream absent with coefficient " +
                                               std::to_string(wr));
  }
  const double l_label = t.label_tokens ? t.label_sum / static_cast<double>(t.label_tokens) : 0.0;
  const double l_rat =
      t.rationale_tokens ? t.rationale_sum / static_cast<double>(t.rationale_tokens) : 0.0;
  return wl * l_label + wr * l_rat;
}

double loss_align_unit_weight(const TokenLossBatch& batch) {
  if (batch.items.empty()) throw Error(ErrorCode::kEmptyBatch, "loss_align on an empty batch");
  const auto t = stream_totals(batch);
  if (t.label_tokens == 0) throw Error(ErrorCode::kMissingStream, "label stream absent");
  if (t.rationale_tokens == 0) throw Error(ErrorCode::kMissingStream, "rationale stream absent");
  return t.label_sum / static_cast<double>(t.label_tokens) +
         t.rationale_sum / static_cast<double>(t.rationale_tokens);
}

double flat_sum_oracle(const TokenLossBatch& batch) {
  if (batch.items.empty()) throw Error(ErrorCode::kEmptyBatch, "oracle on an empty batch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& losses = batch.items[i].token_losses;
    for (std::size_t t = 0; t < losses.size(); ++t) {
      sum += losses[t];
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::kEmptyBatch, "oracle on a batch without tokens");
  return sum / static_cast<double>(count);
}

const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> kGrid = {0.0, 0.25, 0.5, 0.75, 1.0};
  return kGrid;
}

std::vector<SweepRow> coefficient_sweep(std::span<const TokenLossBatch> batches,
                                        std::span<const double> lambdas) {
  std::vector<SweepRow> rows;
  rows.reserve(lambdas.size());
  for (double lambda : lambdas) {
    const auto coeff = CoefficientPair::make(lambda);
    if (batches.empty()) throw Error(ErrorCode::kEmptyBatch, "sweep without batches");
    ExactSum sum;
    for (const auto& b : batches) sum.add(loss_align(b, coeff));
    rows.push_back(SweepRow{lambda, sum.value() / static_cast<double>(batches.size())});
  }
  return rows;
}

TokenLossBatch batch_from_json(const json& j) {
  TokenLossBatch b;
  if (!j.contains("items") || !j["items"].is_array()) {
    throw Error(ErrorCode::kInvalidBatch, "batch lacks an 'items' array");
  }
  for (const auto& it : j["items"]) {
    TokenLossItem item;
    item.sample_id = it.value("sample_id", std::string());
    item.stream = parse_loss_stream(it.at("stream").get<std::string>());
    item.token_losses = it.at("token_losses").get<std::vector<double>>();
    b.items.push_back(std::move(item));
  }
  b.validate();
  return b;
}

json batch_to_json(const TokenLossBatch& batch) {
  json items = json::array();
  for (const auto& it : batch.items) {
    items.push_back({{"sample_id", it.sample_id},
                     {"stream", to_string(it.stream)},
                     {"token_losses", it.token_losses}});
  }
  return {{"items", items}};
}

namespace {

std::string lambda_key(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

}  // namespace

json loss_check(const json& input) {
  std::vector<TokenLossBatch> batches;
  if (input.contains("batches")) {
    for (const auto& b : input["batches"]) batches.push_back(batch_from_json(b));
  } else {
    batches.push_back(batch_from_json(input));
  }
  std::vector<double> lambdas = default_lambda_grid();
  if (input.contains("lambdas")) lambdas = input["lambdas"].get<std::vector<double>>();

  json per_batch = json::array();
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto& b = batches[i];
    const auto t = stream_totals(b);
    json row = {{"index", i},
                {"items", b.size()},
                {"label_tokens", t.label_tokens},
                {"rationale_tokens", t.rationale_tokens},
                {"loss_mix", loss_mix(b)}};
    json align = json::object();
    for (double lambda : lambdas) {
      try {
        align[lambda_key(lambda)] = loss_align(b, CoefficientPair::make(lambda));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kMissingStream) throw;
        align[lambda_key(lambda)] = nullptr;
      }
    }
    row["loss_align"] = align;
    row["loss_align_unit_weight"] =
        (t.label_tokens && t.rationale_tokens) ? json(loss_align_unit_weight(b)) : json(nullptr);
    per_batch.push_back(row);
  }
  json sweep = json::array();
  for (double lambda : lambdas) {
    json mean = nullptr;
    try {
      const double one[] = {lambda};
      mean = coefficient_sweep(batches, one).front().mean_loss;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMissingStream) throw;
    }
    sweep.push_back({{"lambda", lambda}, {"mean_loss", mean}});
  }
  return {{"batches", per_batch}, {"sweep", sweep}};
}

}  // namespace rforge
