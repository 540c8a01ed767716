#include "rforge/rationale.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rforge/answer.hpp"
#include "rforge/concurrency.hpp"
#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/rng.hpp"
#include "rforge/text.hpp"

namespace rforge {

std::string_view to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::kOriginal: return "original";
    case DesignKind::kWithLabel: return "with_label";
    case DesignKind::kWithLabelExemplars: return "with_label_exemplars";
    case DesignKind::kWithLabelCriteria: return "with_label_criteria";
  }
  return "with_label";
}

DesignKind parse_design_kind(std::string_view s) {
  for (auto k : {DesignKind::kOriginal, DesignKind::kWithLabel, DesignKind::kWithLabelExemplars,
                 DesignKind::kWithLabelCriteria}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::kInvalidRecord, "unknown prompt design '" + std::string(s) + "'");
}

PromptDesign PromptDesign::make(DesignKind kind) {
  return {kind, kind == DesignKind::kWithLabelExemplars ? kPromptExemplars : 0};
}

std::string_view to_string(RationaleStatus status) {
  switch (status) {
    case RationaleStatus::kPending: return "pending";
    case RationaleStatus::kAccepted: return "accepted";
    case RationaleStatus::kRejectedSafety: return "rejected_safety";
    case RationaleStatus::kRejectedLength: return "rejected_length";
    case RationaleStatus::kRejectedInconsistent: return "rejected_inconsistent";
    case RationaleStatus::kRewriteQueue: return "rewrite_queue";
  }
  return "pending";
}

RationaleStatus parse_rationale_status(std::string_view s) {
  for (auto st : {RationaleStatus::kPending, RationaleStatus::kAccepted,
                  RationaleStatus::kRejectedSafety, RationaleStatus::kRejectedLength,
                  RationaleStatus::kRejectedInconsistent, RationaleStatus::kRewriteQueue}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kInvalidRecord, "unknown rationale status '" + std::string(s) + "'");
}

json record_to_json(const RationaleRecord& r) {
  return {{"sample_id", r.sample_id},
          {"design", {{"kind", to_string(r.design.kind)},
                      {"exemplar_count", r.design.exemplar_count}}},
          {"text", r.text},
          {"final_answer", r.final_answer ? json(*r.final_answer) : json(nullptr)},
          {"status", to_string(r.status)},
          {"token_count", r.token_count},
          {"label_token_count", r.label_token_count},
          {"refused", r.refused},
          {"model", r.model}};
}

RationaleRecord record_from_json(const json& j) {
  RationaleRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  const auto& d = j.at("design");
  r.design.kind = parse_design_kind(d.at("kind").get<std::string>());
  r.design.exemplar_count = d.value("exemplar_count", std::size_t{0});
  r.text = j.at("text").get<std::string>();
  if (j.contains("final_answer") && !j["final_answer"].is_null()) {
    r.final_answer = j["final_answer"].get<std::string>();
  }
  r.status = parse_rationale_status(j.value("status", std::string("pending")));
  r.token_count = j.value("token_count", std::size_t{0});
  r.label_token_count = j.value("label_token_count", std::size_t{0});
  r.refused = j.value("refused", false);
  r.model = j.value("model", std::string());
  return r;
}

std::vector<Exemplar> load_exemplar_bank(const std::filesystem::path& path) {
  std::vector<Exemplar> out;
  for (const auto& row : read_jsonl(path)) {
    Exemplar e;
    e.fields = row.at("fields").get<std::map<std::string, std::string>>();
    e.label = row.at("label").get<std::string>();
    e.rationale = row.at("rationale").get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

std::map<std::string, PromptDesign> allocate_designs(std::span<const Sample> samples,
                                                     const DatasetSpec& spec,
                                                     double criteria_fraction,
                                                     std::uint64_t seed, DesignKind base) {
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::map<std::string, PromptDesign> out;
  for (const auto& id : ids) out[id] = PromptDesign::make(base);
  if (spec.criteria.empty() || spec.is_span_task()) return out;

  Rng rng(seed);
  rng.shuffle(std::span<std::string>(ids));
  const auto n_criteria = static_cast<std::size_t>(std::llround(
      std::clamp(criteria_fraction, 0.0, 1.0) * static_cast<double>(ids.size())));
  for (std::size_t i = 0; i < n_criteria; ++i) {
    out[ids[i]] = PromptDesign::make(DesignKind::kWithLabelCriteria);
  }
  return out;
}

namespace {

std::string lower_if_en(const std::string& s, Language language) {
  return language == Language::kEn ? text::ascii_lower(s) : s;
}

std::string preamble(const DatasetSpec& spec) {
  if (!spec.description.empty()) return text::trim(spec.description);
  return as_sentence(task_instruction(spec), spec.language);
}

// "Now, read the Question 1, Question 2, and their relationship"
std::string read_line(const DatasetSpec& spec, bool with_label) {
  const bool zh = spec.language == Language::kZh;
  std::vector<std::string> names;
  for (const auto& f : spec.input_schema) names.push_back(spec.display_name(f));
  const auto name = lower_if_en(label_name(spec), spec.language);
  if (zh) {
    std::string s = "现在，阅读" + text::join(names, "、");
    if (with_label) s += names.size() > 1 ? "和它们之间的" + name : "和它的" + name;
    return s;
  }
  std::string s = "Now, read the " + text::join(names, ", ");
  if (with_label) s += names.size() > 1 ? ", and their " + name : " and its " + name;
  return s;
}

std::string closing_instruction(const DatasetSpec& spec) {
  if (spec.language == Language::kZh) {
    return "最后一行以“" + std::string(answer_prefix(spec.language)) + "”开头给出答案。";
  }
  return "End with a final line that starts with \"" + std::string(answer_prefix(spec.language)) +
         "\" followed by the answer.";
}

std::string exemplar_block(std::span<const Exemplar> exemplars, const DatasetSpec& spec) {
  const bool zh = spec.language == Language::kZh;
  std::string out;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const auto& e = exemplars[i];
    out += zh ? "[示例" + std::to_string(i + 1) + "]\n" : "[Exemplar " + std::to_string(i + 1) + "]\n";
    std::vector<std::string> parts;
    for (const auto& f : spec.input_schema) {
      auto it = e.fields.find(f);
      parts.push_back(spec.display_name(f) + ": " + (it == e.fields.end() ? "" : it->second));
    }
    parts.push_back(label_name(spec) + ": " + e.label);
    out += text::join(parts, " ") + "\n";
    out += (zh ? "推理过程: " : "Rationale: ") + e.rationale + "\n";
  }
  return out;
}

}  // namespace

std::string build_generation_prompt(const Sample& sample, const DatasetSpec& spec,
                                    const PromptDesign& design,
                                    std::span<const Exemplar> exemplars) {
  const bool zh = spec.language == Language::kZh;
  const auto name = label_name(spec);
  const auto lname = lower_if_en(name, spec.language);
  std::string p = preamble(spec) + "\n\n";

  if (design.kind == DesignKind::kWithLabelCriteria) {
    if (spec.criteria.empty()) {
      throw Error(ErrorCode::kMissingCriteria, spec.name + " has no label criteria");
    }
    p += zh ? "标签判断标准:\n" : "Label Criteria:\n";
    for (const auto& label : spec.label_space) {
      auto it = spec.criteria.find(label);
      if (it != spec.criteria.end()) p += label + (zh ? "：" : ": ") + it->second + "\n";
    }
    p += "\n";
  }
  if (design.kind == DesignKind::kWithLabelExemplars) {
    const std::size_t need = design.exemplar_count == 0 ? kPromptExemplars : design.exemplar_count;
    if (exemplars.size() < need) {
      throw Error(ErrorCode::kMissingExemplars,
                  spec.name + ": exemplar design needs " + std::to_string(need) +
                      " exemplars, bank has " + std::to_string(exemplars.size()));
    }
    p += exemplar_block(exemplars.first(need), spec) + "\n";
  }

  const bool with_label = design.kind != DesignKind::kOriginal;
  p += read_line(spec, with_label) + "\n";
  p += zh ? "输入:\n" : "Input:\n";
  p += render_input(sample, spec) + "\n";
  if (with_label) p += name + ": " + label_text(sample.label) + "\n";
  p += "\n";

  switch (design.kind) {
    case DesignKind::kOriginal:
      p += zh ? "然后，一步一步思考，先给出推理过程，最后给出" + name + "作为答案。"
              : "Then, think step by step, provide the reasoning process first, and finally "
                "give the " + lname + " as the answer.";
      break;
    case DesignKind::kWithLabel:
      p += zh ? "然后，一步一步思考，给出得到该" + name + "的推理过程。"
              : "Then, think step by step, provide the reasoning process that leads to the " +
                    lname + ".";
      break;
    case DesignKind::kWithLabelExemplars:
      p += zh ? "然后，参考上面的示例，给出得到该" + name + "的推理过程。"
              : "Then, refer to the above exemplars, provide the reasoning process that leads "
                "to the " + lname + ".";
      break;
    case DesignKind::kWithLabelCriteria:
      p += zh ? "然后，一步一步思考，给出得到该" + name + "的推理过程。"
              : "Then, step by step, provide the reasoning process that leads to the " + lname +
                    ".";
      break;
  }
  p += "\n" + closing_instruction(spec);
  return p;
}

ChatRequest build_generation_request(const Sample& sample, const DatasetSpec& spec,
                                     const PromptDesign& design,
                                     std::span<const Exemplar> exemplars,
                                     const std::string& model) {
  ChatRequest r;
  r.model = model;
  r.temperature = kGenerationTemperature;
  r.messages.push_back({"user", build_generation_prompt(sample, spec, design, exemplars)});
  r.metadata = {{"task", "rationale"},
                {"dataset", spec.name},
                {"sample_id", sample.id},
                {"design", to_string(design.kind)},
                {"language", to_string(spec.language)},
                {"label_space", spec.label_space},
                {"input", render_input(sample, spec)},
                {"reference_label", label_text(sample.label)}};
  return r;
}

std::vector<RationaleRecord> generate_rationales(
    std::span<const Sample> samples, const DatasetSpec& spec,
    const std::map<std::string, PromptDesign>& designs, std::span<const Exemplar> exemplars,
    ChatClient& client, const std::string& model, std::size_t concurrency) {
  std::vector<const Sample*> order;
  for (const auto& s : samples) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  order.erase(std::unique(order.begin(), order.end(),
                          [](const auto* a, const auto* b) { return a->id == b->id; }),
              order.end());

  std::vector<RationaleRecord> out(order.size());
  parallel_for(order.size(), concurrency, [&](std::size_t i) {
    const Sample& s = *order[i];
    auto it = designs.find(s.id);
    const PromptDesign design = it == designs.end() ? PromptDesign{} : it->second;
    const auto response =
        client.complete(build_generation_request(s, spec, design, exemplars, model));
    RationaleRecord& r = out[i];
    r.sample_id = s.id;
    r.design = design;
    r.text = response.text;
    r.refused = response.refused;
    r.model = model;
  });
  return out;
}

const std::vector<std::string>& default_leak_keywords() {
  static const std::vector<std::string> kKeywords = {
      "supports the given label",
      "aligns with the given label",
      "the provided label is reasonable",
      "consistent with the given label",
      "支持给定的标签",
      "与给定的标签一致",
      "符合给定的标签",
      "提供的标签是合理的",
      "所给标签是合理的",
  };
  return kKeywords;
}

const std::vector<std::string>& default_refusal_phrases() {
  static const std::vector<std::string> kPhrases = {
      "i cannot answer",
      "i can't answer",
      "i'm sorry, but i can't",
      "i am unable to answer",
      "无法回答",
      "抱歉，我无法",
      "我不能回答",
  };
  return kPhrases;
}

namespace {

bool contains_any(std::string_view haystack, const std::vector<std::string>& needles) {
  const auto folded = text::ascii_lower(haystack);
  return std::any_of(needles.begin(), needles.end(), [&](const std::string& n) {
    return !n.empty() && folded.find(text::ascii_lower(n)) != std::string::npos;
  });
}

}  // namespace

RationaleRecord filter_rationale(RationaleRecord record, const Sample& sample,
                                 const DatasetSpec& spec, const Tokenizer& tokenizer,
                                 const FilterConfig& config) {
  const auto label = label_text(sample.label);
  record.token_count = tokenizer.count(record.text);
  record.label_token_count = tokenizer.count(label);
  record.final_answer = extract_final_answer(record.text, AnswerParser::for_dataset(spec));

  if (record.refused || contains_any(record.text, config.refusal_phrases)) {
    record.status = RationaleStatus::kRejectedSafety;
  } else if (record.token_count + record.label_token_count >= config.max_tokens) {
    record.status = RationaleStatus::kRejectedLength;
  } else if (!record.final_answer || *record.final_answer != label) {
    record.status = RationaleStatus::kRejectedInconsistent;
  } else if (contains_any(record.text, config.leak_keywords)) {
    record.status = RationaleStatus::kRewriteQueue;
  } else {
    record.status = RationaleStatus::kAccepted;
  }
  return record;
}

json FilterFunnel::to_json() const {
  return {{"generated", generated},
          {"accepted", accepted},
          {"rejected_safety", rejected_safety},
          {"rejected_length", rejected_length},
          {"rejected_inconsistent", rejected_inconsistent},
          {"rewrite_queue", rewrite_queue}};
}

FilterFunnel funnel_of(std::span<const RationaleRecord> records) {
  FilterFunnel f;
  for (const auto& r : records) {
    ++f.generated;
    switch (r.status) {
      case RationaleStatus::kAccepted: ++f.accepted; break;
      case RationaleStatus::kRejectedSafety: ++f.rejected_safety; break;
      case RationaleStatus::kRejectedLength: ++f.rejected_length; break;
      case RationaleStatus::kRejectedInconsistent: ++f.rejected_inconsistent; break;
      case RationaleStatus::kRewriteQueue: ++f.rewrite_queue; break;
      case RationaleStatus::kPending: break;
    }
  }
  return f;
}

std::vector<RationaleRecord> filter_all(std::span<const RationaleRecord> records,
                                        std::span<const Sample> samples,
                                        const DatasetSpec& spec, const Tokenizer& tokenizer,
                                        const FilterConfig& config, std::size_t concurrency) {
  std::unordered_map<std::string, const Sample*> index;
  for (const auto& s : samples) index.emplace(s.id, &s);
  std::vector<RationaleRecord> out(records.size());
  parallel_for(records.size(), concurrency, [&](std::size_t i) {
    auto it = index.find(records[i].sample_id);
    if (it == index.end()) {
      throw Error(ErrorCode::kInvalidRecord,
                  "rationale for unknown sample " + records[i].sample_id);
    }
    out[i] = filter_rationale(records[i], *it->second, spec, tokenizer, config);
  });
  return out;
}

std::vector<RationaleRecord> apply_rewrites(std::span<const RationaleRecord> records,
                                            const std::map<std::string, std::string>& rewrites,
                                            std::span<const Sample> samples,
                                            const DatasetSpec& spec, const Tokenizer& tokenizer,
                                            const FilterConfig& config) {
  std::unordered_map<std::string, const Sample*> index;
  for (const auto& s : samples) index.emplace(s.id, &s);
  std::vector<RationaleRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    if (r.status != RationaleStatus::kRewriteQueue) continue;
    auto rw = rewrites.find(r.sample_id);
    auto it = index.find(r.sample_id);
    if (rw == rewrites.end() || it == index.end()) continue;
    r.text = rw->second;
    r.status = RationaleStatus::kPending;
    r = filter_rationale(std::move(r), *it->second, spec, tokenizer, config);
  }
  return out;
}

}  // namespace rforge
