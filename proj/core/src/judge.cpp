#include "rforge/judge.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "rforge/answer.hpp"
#include "rforge/concurrency.hpp"
#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/rng.hpp"
#include "rforge/text.hpp"

namespace rforge {

std::string_view to_string(ResolutionKind kind) {
  switch (kind) {
    case ResolutionKind::kUnanimous: return "unanimous";
    case ResolutionKind::kMajority: return "majority";
    case ResolutionKind::kPrimaryTiebreak: return "primary_tiebreak";
    case ResolutionKind::kUnresolved: return "unresolved";
  }
  return "unresolved";
}

std::string_view to_string(Disposition disposition) {
  return disposition == Disposition::kRetained ? "retained" : "review_queue";
}

std::string_view to_string(ReviewVerdict verdict) {
  switch (verdict) {
    case ReviewVerdict::kCorrect: return "correct";
    case ReviewVerdict::kWrong: return "wrong";
    case ReviewVerdict::kAmbiguous: return "ambiguous";
  }
  return "ambiguous";
}

ReviewVerdict parse_review_verdict(std::string_view s) {
  if (s == "correct") return ReviewVerdict::kCorrect;
  if (s == "wrong") return ReviewVerdict::kWrong;
  if (s == "ambiguous") return ReviewVerdict::kAmbiguous;
  throw Error(ErrorCode::kInvalidRecord, "unknown review verdict '" + std::string(s) + "'");
}

namespace {

ResolutionKind parse_resolution_kind(std::string_view s) {
  for (auto k : {ResolutionKind::kUnanimous, ResolutionKind::kMajority,
                 ResolutionKind::kPrimaryTiebreak, ResolutionKind::kUnresolved}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::kInvalidRecord, "unknown resolution kind '" + std::string(s) + "'");
}

json optional_json(const std::optional<std::string>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace

json verdict_to_json(const JudgeVerdict& v) {
  json preds = json::array();
  for (const auto& p : v.predictions) {
    preds.push_back({{"judge", p.judge}, {"label", optional_json(p.label)}, {"raw", p.raw}});
  }
  return {{"sample_id", v.sample_id},
          {"original_label", v.original_label},
          {"predictions", preds},
          {"resolved", optional_json(v.resolved)},
          {"resolution_kind", to_string(v.resolution_kind)},
          {"disposition", to_string(v.disposition)}};
}

JudgeVerdict verdict_from_json(const json& j) {
  JudgeVerdict v;
  v.sample_id = j.at("sample_id").get<std::string>();
  v.original_label = j.at("original_label").get<std::string>();
  for (const auto& p : j.at("predictions")) {
    v.predictions.push_back(JudgePrediction{p.at("judge").get<std::string>(),
                                            optional_string(p, "label"),
                                            p.value("raw", std::string())});
  }
  v.resolved = optional_string(j, "resolved");
  v.resolution_kind = parse_resolution_kind(j.at("resolution_kind").get<std::string>());
  v.disposition = j.at("disposition").get<std::string>() == "retained"
                      ? Disposition::kRetained
                      : Disposition::kReviewQueue;
  return v;
}

Resolution resolve_votes(std::span<const JudgePrediction> predictions,
                         std::string_view primary_judge) {
  std::vector<const std::string*> votes;
  const std::string* primary = nullptr;
  for (const auto& p : predictions) {
    if (!p.label) continue;
    votes.push_back(&*p.label);
    if (p.judge == primary_judge) primary = &*p.label;
  }
  // Most frequent label; the first to reach the top count wins ties, which
  // only matters when no label has two votes (handled below).
  const std::string* top = nullptr;
  std::size_t top_count = 0;
  for (const auto* v : votes) {
    const auto c = static_cast<std::size_t>(
        std::count_if(votes.begin(), votes.end(), [&](const auto* w) { return *w == *v; }));
    if (c > top_count) {
      top = v;
      top_count = c;
    }
  }
  if (top_count >= 2) {
    const bool all = top_count == predictions.size();
    return {*top, all ? ResolutionKind::kUnanimous : ResolutionKind::kMajority};
  }
  if (primary) return {*primary, ResolutionKind::kPrimaryTiebreak};
  return {std::nullopt, ResolutionKind::kUnresolved};
}

std::vector<Sample> select_exemplars(const Sample& target, std::span<const Sample> pool,
                                     const DatasetSpec& spec, std::uint64_t seed,
                                     std::size_t count) {
  std::map<std::string, std::vector<const Sample*>> by_label;
  std::size_t available = 0;
  for (const auto& s : pool) {
    if (s.id == target.id) continue;
    by_label[label_text(s.label)].push_back(&s);
    ++available;
  }
  if (available < count) {
    throw Error(ErrorCode::kInsufficientExemplars,
                spec.name + ": " + std::to_string(available) +
                    " exemplar candidates for sample " + target.id + ", need " +
                    std::to_string(count));
  }

  Rng rng(derive_seed(seed, target.id));
  std::vector<std::string> order;
  for (const auto& l : spec.label_space) {
    if (by_label.count(l)) order.push_back(l);
  }
  for (const auto& [l, _] : by_label) {
    if (std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);
  }
  for (auto& [_, members] : by_label) {
    std::sort(members.begin(), members.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
    rng.shuffle(std::span<const Sample*>(members));
  }

  std::vector<Sample> out;
  std::map<std::string, std::size_t> cursor;
  while (out.size() < count) {
    for (const auto& l : order) {
      auto& members = by_label[l];
      auto& c = cursor[l];
      if (c < members.size() && out.size() < count) out.push_back(*members[c++]);
    }
  }
  return out;
}

std::string build_judge_prompt(const Sample& target, std::span<const Sample> exemplars,
                               const DatasetSpec& spec) {
  if (exemplars.size() != kJudgeShots) {
    throw Error(ErrorCode::kInsufficientExemplars,
                "judge prompt needs exactly " + std::to_string(kJudgeShots) +
                    " exemplars, got " + std::to_string(exemplars.size()));
  }
  const bool zh = spec.language == Language::kZh;
  const auto name = label_name(spec);
  std::string p;
  if (zh) {
    p += "你是一名数据标注专家。";
    if (!spec.description.empty()) p += text::trim(spec.description);
    p += "\n" + as_sentence(task_instruction(spec), spec.language) + "\n";
    p += "请直接输出正确的" + name + "作为答案，";
    p += spec.is_span_task() ? std::string("格式为“类型:文本; 类型:文本”")
                             : "从" + label_choices(spec) + "中选择一个";
    p += "，不要给出任何解释。\n";
  } else {
    p += "You are an expert data annotator.";
    if (!spec.description.empty()) p += " " + text::trim(spec.description);
    p += "\n" + as_sentence(task_instruction(spec), spec.language) + "\n";
    p += "Directly output the correct " + name + " as the answer, ";
    p += spec.is_span_task() ? std::string("in the form \"TYPE:text; TYPE:text\"")
                             : "choosing one of " + label_choices(spec);
    p += ". Do not give any explanation.\n";
  }
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    p += zh ? "\n[示例" + std::to_string(i + 1) + "]\n" : "\n[Example " + std::to_string(i + 1) + "]\n";
    p += render_input(exemplars[i], spec) + "\n";
    p += name + ": " + label_text(exemplars[i].label) + "\n";
  }
  p += zh ? "\n现在，阅读下面的输入，输出正确的" + name + "。\n"
          : "\nNow, read the following input and output the correct " + name + ".\n";
  p += render_input(target, spec) + "\n";
  p += name + ":";
  return p;
}

ChatRequest build_judge_request(const Sample& target, std::span<const Sample> exemplars,
                                const DatasetSpec& spec, const std::string& model) {
  ChatRequest r;
  r.model = model;
  r.temperature = 0.0;
  r.messages.push_back({"user", build_judge_prompt(target, exemplars, spec)});
  r.metadata = {{"task", "judge"},
                {"dataset", spec.name},
                {"sample_id", target.id},
                {"label_space", spec.label_space},
                {"input", render_input(target, spec)},
                {"reference_label", label_text(target.label)}};
  return r;
}

std::optional<std::string> parse_judge_output(std::string_view output, const DatasetSpec& spec) {
  if (spec.is_span_task()) {
    const auto spans = parse_span_text(strip_trailing_punct(output));
    if (spans.empty()) return std::nullopt;
    return label_text(Label(spans));
  }
  // A judge may still prefix its answer with the label name ("Relationship: X").
  const auto trimmed = text::trim(output);
  if (auto exact = match_label(trimmed, spec.label_space)) return exact;
  const auto name = label_name(spec);
  for (const auto* sep : {": ", ":", "：", " "}) {
    const auto head = name + sep;
    if (trimmed.rfind(head, 0) == 0) return match_label(trimmed.substr(head.size()), spec.label_space);
  }
  return std::nullopt;
}

JudgeVerdict adjudicate(const Sample& sample, std::span<const Sample> exemplars,
                        const DatasetSpec& spec, std::span<const JudgeClient> judges,
                        std::string_view primary_judge) {
  if (judges.size() != kJudgeCount) {
    throw Error(ErrorCode::kInvalidConfig,
                "exactly 3 judges required, got " + std::to_string(judges.size()));
  }
  if (std::none_of(judges.begin(), judges.end(),
                   [&](const JudgeClient& j) { return j.name == primary_judge; })) {
    throw Error(ErrorCode::kInvalidConfig,
                "primary judge '" + std::string(primary_judge) + "' is not configured");
  }
  JudgeVerdict v;
  v.sample_id = sample.id;
  v.original_label = label_text(sample.label);
  for (const auto& judge : judges) {
    const auto request = build_judge_request(sample, exemplars, spec, judge.model);
    ChatResponse response;
    try {
      response = judge.client->complete(request);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kJudgeUnavailable, judge.name + ": " + e.what());
    }
    std::optional<std::string> label;
    if (!response.refused) label = parse_judge_output(response.text, spec);
    v.predictions.push_back(JudgePrediction{judge.name, label, response.text});
  }
  const auto r = resolve_votes(v.predictions, primary_judge);
  v.resolved = r.label;
  v.resolution_kind = r.kind;
  v.disposition = (r.label && *r.label == v.original_label) ? Disposition::kRetained
                                                            : Disposition::kReviewQueue;
  return v;
}

JudgeRun run_judging(std::span<const Sample> samples, std::span<const Sample> pool,
                     const DatasetSpec& spec, std::span<const JudgeClient> judges,
                     std::string_view primary_judge, std::uint64_t seed,
                     std::size_t concurrency) {
  std::vector<std::optional<JudgeVerdict>> slots(samples.size());
  std::vector<std::string> failures(samples.size());
  parallel_for(samples.size(), concurrency, [&](std::size_t i) {
    const auto exemplars = select_exemplars(samples[i], pool, spec, seed);
    try {
      slots[i] = adjudicate(samples[i], exemplars, spec, judges, primary_judge);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kJudgeUnavailable) throw;
      failures[i] = e.what();
    }
  });
  JudgeRun run;
  std::vector<std::pair<std::string, std::string>> deferred;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (slots[i]) {
      run.verdicts.push_back(std::move(*slots[i]));
    } else {
      deferred.emplace_back(samples[i].id, failures[i]);
    }
  }
  std::sort(run.verdicts.begin(), run.verdicts.end(),
            [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  std::sort(deferred.begin(), deferred.end());
  for (auto& [id, msg] : deferred) {
    run.deferred.push_back(id);
    run.errors.push_back(std::move(msg));
  }
  return run;
}

Partition partition(std::span<const Sample> samples, std::span<const JudgeVerdict> verdicts) {
  std::unordered_map<std::string, const JudgeVerdict*> index;
  for (const auto& v : verdicts) index[v.sample_id] = &v;
  Partition p;
  for (const auto& s : samples) {
    auto it = index.find(s.id);
    if (it == index.end()) throw Error(ErrorCode::kMissingVerdict, "no verdict for " + s.id);
    const auto& v = *it->second;
    const bool keep = v.resolved && *v.resolved == label_text(s.label);
    (keep ? p.retained : p.review_queue).push_back(s);
  }
  return p;
}

json outcome_to_json(const ReviewOutcome& o) {
  return {{"sample_id", o.sample_id},
          {"verdict", to_string(o.verdict)},
          {"corrected_label", optional_json(o.corrected_label)},
          {"annotator", o.annotator},
          {"timestamp", o.timestamp}};
}

ReviewOutcome outcome_from_json(const json& j) {
  ReviewOutcome o;
  o.sample_id = j.at("sample_id").get<std::string>();
  o.verdict = parse_review_verdict(j.at("verdict").get<std::string>());
  o.corrected_label = optional_string(j, "corrected_label");
  o.annotator = j.value("annotator", std::string());
  o.timestamp = j.value("timestamp", std::string());
  if (o.corrected_label.has_value() != (o.verdict == ReviewVerdict::kWrong)) {
    throw Error(ErrorCode::kInvalidRecord,
                "review outcome for " + o.sample_id +
                    ": corrected_label must be present exactly when verdict is wrong");
  }
  return o;
}

std::vector<ReviewOutcome> read_review_outcomes(const std::filesystem::path& path) {
  std::vector<ReviewOutcome> out;
  for (const auto& row : read_jsonl(path)) out.push_back(outcome_from_json(row));
  return out;
}

std::vector<Sample> select_audit(std::span<const Sample> review_queue, std::size_t size,
                                 std::uint64_t seed) {
  std::vector<Sample> pool(review_queue.begin(), review_queue.end());
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  Rng rng(seed);
  rng.shuffle(std::span<Sample>(pool));
  if (pool.size() > size) pool.resize(size);
  return pool;
}

AuditSummary summarize_audit(std::span<const ReviewOutcome> outcomes) {
  AuditSummary s;
  for (const auto& o : outcomes) {
    ++s.audited;
    switch (o.verdict) {
      case ReviewVerdict::kCorrect: ++s.correct; break;
      case ReviewVerdict::kWrong: ++s.wrong; break;
      case ReviewVerdict::kAmbiguous: ++s.ambiguous; break;
    }
  }
  if (s.audited > 0) {
    s.correct_fraction = static_cast<double>(s.correct) / static_cast<double>(s.audited);
  }
  s.high_quality = 2 * s.correct > s.audited;
  return s;
}

ReviewApplication apply_review_outcomes(const Partition& partition,
                                        std::span<const ReviewOutcome> outcomes,
                                        const DatasetSpec& spec) {
  std::unordered_map<std::string, const ReviewOutcome*> latest;
  for (const auto& o : outcomes) latest[o.sample_id] = &o;
  ReviewApplication app;
  app.corpus = partition.retained;
  for (const auto& s : partition.review_queue) {
    auto it = latest.find(s.id);
    if (it == latest.end()) {
      ++app.pending;
      continue;
    }
    const auto& o = *it->second;
    switch (o.verdict) {
      case ReviewVerdict::kCorrect:
        app.corpus.push_back(s);
        ++app.confirmed;
        break;
      case ReviewVerdict::kWrong: {
        Sample relabeled = s;
        if (spec.is_span_task()) {
          relabeled.label = parse_span_text(*o.corrected_label);
        } else {
          if (!spec.has_label(*o.corrected_label)) {
            throw Error(ErrorCode::kUnknownLabel, "corrected label '" + *o.corrected_label +
                                                      "' for " + s.id + " is not in " +
                                                      spec.name + "'s label space");
          }
          relabeled.label = *o.corrected_label;
        }
        app.corpus.push_back(std::move(relabeled));
        ++app.relabeled;
        break;
      }
      case ReviewVerdict::kAmbiguous:
        ++app.excluded;
        break;
    }
  }
  return app;
}

std::vector<Sample> recollection_candidates(std::span<const Sample> remaining,
                                            const VectorTable& vectors, double fraction,
                                            std::uint64_t seed) {
  const auto target = static_cast<std::size_t>(
      std::llround(std::clamp(fraction, 0.0, 1.0) * static_cast<double>(remaining.size())));
  if (target == 0) return {};
  return select_training_subset(remaining, vectors, target, seed);
}

}  // namespace rforge
