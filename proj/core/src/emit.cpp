#include "rforge/emit.hpp"

#include <algorithm>
#include <unordered_map>

#include "rforge/answer.hpp"
#include "rforge/error.hpp"
#include "rforge/hash.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/rng.hpp"
#include "rforge/text.hpp"

namespace rforge {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kLabelOnly: return "label_only";
    case Method::kReason: return "reason";
    case Method::kExplain: return "explain";
    case Method::kMix: return "mix";
    case Method::kAlign: return "align";
  }
  return "label_only";
}

std::string_view to_string(Stream stream) {
  switch (stream) {
    case Stream::kLabel: return "label";
    case Stream::kRationale: return "rationale";
    case Stream::kReasonConcat: return "reason_concat";
    case Stream::kExplainConcat: return "explain_concat";
  }
  return "label";
}

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kLabelOnly: return "label_only";
    case TemplateKind::kReason: return "reason";
    case TemplateKind::kExplain: return "explain";
  }
  return "label_only";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll = {Method::kLabelOnly, Method::kReason, Method::kExplain,
                                           Method::kMix, Method::kAlign};
  return kAll;
}

Method parse_method(std::string_view s) {
  for (auto m : all_methods()) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown training method '" + std::string(s) + "'");
}

Stream parse_stream(std::string_view s) {
  for (auto st : {Stream::kLabel, Stream::kRationale, Stream::kReasonConcat,
                  Stream::kExplainConcat}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kInvalidRecord, "unknown stream '" + std::string(s) + "'");
}

json example_to_json(const TrainingExample& e) {
  return {{"sample_id", e.sample_id},
          {"method", to_string(e.method)},
          {"stream", to_string(e.stream)},
          {"instruction", e.instruction},
          {"input", e.input},
          {"target", e.target},
          {"batch_id", e.batch_id ? json(*e.batch_id) : json(nullptr)}};
}

TrainingExample example_from_json(const json& j) {
  TrainingExample e;
  e.sample_id = j.at("sample_id").get<std::string>();
  e.method = parse_method(j.at("method").get<std::string>());
  e.stream = parse_stream(j.at("stream").get<std::string>());
  e.instruction = j.at("instruction").get<std::string>();
  e.input = j.at("input").get<std::string>();
  e.target = j.at("target").get<std::string>();
  if (j.contains("batch_id") && !j["batch_id"].is_null()) {
    e.batch_id = j["batch_id"].get<std::string>();
  }
  return e;
}

namespace {

std::string template_key(const std::string& dataset, Language language, TemplateKind kind) {
  return dataset + "/" + std::string(to_string(language)) + "/" + std::string(to_string(kind));
}

std::string choices_text(const DatasetSpec& spec) {
  if (!spec.is_span_task()) return label_choices(spec);
  return spec.language == Language::kZh ? "“类型:文本; 类型:文本”格式的答案片段"
                                        : "the answer spans in the form TYPE:text; TYPE:text";
}

}  // namespace

TemplateRegistry TemplateRegistry::with_defaults() {
  TemplateRegistry r;
  r.add("*", Language::kEn, TemplateKind::kLabelOnly,
        "{instruction} Directly output {choices} as the answer.");
  r.add("*", Language::kEn, TemplateKind::kReason,
        "{instruction} Give the reasoning process first, and ends with \xE2\x80\x9C{prefix}"
        "\xE2\x80\x9D to provide {choices} as the answer.");
  r.add("*", Language::kEn, TemplateKind::kExplain,
        "{instruction} Directly output {choices} as the answer, and then give the reasoning "
        "process.");
  r.add("*", Language::kZh, TemplateKind::kLabelOnly, "{instruction}直接输出{choices}作为答案。");
  r.add("*", Language::kZh, TemplateKind::kReason,
        "{instruction}先给出推理过程，结尾以“{prefix}”给出{choices}作为答案。");
  r.add("*", Language::kZh, TemplateKind::kExplain,
        "{instruction}先直接输出{choices}作为答案，然后给出得到该答案的推理过程。");
  return r;
}

void TemplateRegistry::add(const std::string& dataset, Language language, TemplateKind kind,
                           std::string text) {
  templates_[template_key(dataset, language, kind)] = std::move(text);
}

const std::string& TemplateRegistry::lookup(const DatasetSpec& spec, TemplateKind kind) const {
  for (const auto& dataset : {spec.name, std::string("*")}) {
    auto it = templates_.find(template_key(dataset, spec.language, kind));
    if (it != templates_.end()) return it->second;
  }
  throw Error(ErrorCode::kMissingTemplate, "no " + std::string(to_string(kind)) +
                                               " template for dataset " + spec.name);
}

std::map<std::string, std::string> TemplateRegistry::checksums() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, text] : templates_) out[key] = sha256_hex(text);
  return out;
}

std::string render_instruction(const DatasetSpec& spec, TemplateKind kind,
                               const TemplateRegistry& registry) {
  std::string out = registry.lookup(spec, kind);
  text::replace_all(out, "{instruction}", as_sentence(task_instruction(spec), spec.language));
  text::replace_all(out, "{choices}", choices_text(spec));
  text::replace_all(out, "{prefix}", answer_prefix(spec.language));
  return out;
}

std::string render_instruction(const DatasetSpec& spec, Method method,
                               const TemplateRegistry& registry) {
  switch (method) {
    case Method::kReason: return render_instruction(spec, TemplateKind::kReason, registry);
    case Method::kExplain: return render_instruction(spec, TemplateKind::kExplain, registry);
    default: return render_instruction(spec, TemplateKind::kLabelOnly, registry);
  }
}

std::string render_example_input(const Sample& sample, const DatasetSpec& spec,
                                 bool step_by_step) {
  std::string out = render_input(sample, spec);
  if (step_by_step) {
    out += spec.language == Language::kZh ? "\n让我们一步一步思考。" : "\nLet's think step by step.";
  }
  return out;
}

std::string normalized_rationale(std::string_view rationale_text) {
  auto body = rationale_body(rationale_text, default_answer_prefixes());
  return body.empty() ? text::trim(rationale_text) : body;
}

std::vector<TrainingExample> emit_examples(std::span<const Sample> samples,
                                           const std::map<std::string, RationaleRecord>& rationales,
                                           const DatasetSpec& spec, Method method,
                                           const TemplateRegistry& registry) {
  std::vector<const Sample*> order;
  for (const auto& s : samples) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  const bool needs_rationale = method != Method::kLabelOnly;
  const auto label_instruction = render_instruction(spec, TemplateKind::kLabelOnly, registry);
  const auto reason_instruction =
      needs_rationale ? render_instruction(spec, TemplateKind::kReason, registry) : std::string();
  const auto explain_instruction =
      method == Method::kExplain ? render_instruction(spec, TemplateKind::kExplain, registry)
                                 : std::string();

  std::vector<TrainingExample> out;
  out.reserve(order.size() * 2);
  for (const auto* s : order) {
    const auto label = label_text(s->label);
    std::string body;
    if (needs_rationale) {
      auto it = rationales.find(s->id);
      if (it == rationales.end() || it->second.status != RationaleStatus::kAccepted) {
        throw Error(ErrorCode::kMissingRationale, s->id);
      }
      body = normalized_rationale(it->second.text);
    }
    const auto plain_input = render_example_input(*s, spec, false);
    const auto reason_target = body + "\n" + answer_sentence(spec.language, label);

    auto make = [&](Stream stream, const std::string& instruction, std::string input,
                    std::string target) {
      TrainingExample e;
      e.sample_id = s->id;
      e.method = method;
      e.stream = stream;
      e.instruction = instruction;
      e.input = std::move(input);
      e.target = std::move(target);
      if (method == Method::kAlign) e.batch_id = "align-" + s->id;
      out.push_back(std::move(e));
    };

    switch (method) {
      case Method::kLabelOnly:
        make(Stream::kLabel, label_instruction, plain_input, label);
        break;
      case Method::kReason:
        make(Stream::kReasonConcat, reason_instruction, render_example_input(*s, spec, true),
             reason_target);
        break;
      case Method::kExplain:
        make(Stream::kExplainConcat, explain_instruction, plain_input, label + "\n" + body);
        break;
      case Method::kMix:
      case Method::kAlign:
        make(Stream::kLabel, label_instruction, plain_input, label);
        make(Stream::kRationale, reason_instruction, render_example_input(*s, spec, true),
             reason_target);
        break;
    }
  }
  return out;
}

namespace {

bool example_less(const TrainingExample& a, const TrainingExample& b) {
  if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
  return a.stream < b.stream;
}

std::string batch_name(std::string_view prefix, std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return std::string(prefix) + digits;
}

}  // namespace

std::vector<Batch> assemble_mix_batches(std::span<const TrainingExample> examples,
                                        std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw Error(ErrorCode::kInvalidBatch, "mix batch size must be >= 1");
  std::vector<TrainingExample> pool(examples.begin(), examples.end());
  std::stable_sort(pool.begin(), pool.end(), example_less);
  Rng rng(seed);
  rng.shuffle(std::span<TrainingExample>(pool));
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < pool.size(); i += batch_size) {
    Batch b;
    b.id = batch_name("mix-", batches.size());
    const auto end = std::min(pool.size(), i + batch_size);
    b.examples.assign(std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(i)),
                      std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(end)));
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<Batch> assemble_align_batches(std::span<const TrainingExample> examples,
                                          std::size_t pairs_per_batch) {
  if (pairs_per_batch == 0) {
    throw Error(ErrorCode::kInvalidBatch, "pairs per batch must be >= 1");
  }
  struct Pair {
    const TrainingExample* label = nullptr;
    const TrainingExample* rationale = nullptr;
  };
  std::map<std::string, Pair> pairs;
  for (const auto& e : examples) {
    if (!e.batch_id) {
      throw Error(ErrorCode::kUnpairedStream, "align example for " + e.sample_id +
                                                  " has no batch_id");
    }
    auto& p = pairs[*e.batch_id];
    const TrainingExample** slot = nullptr;
    if (e.stream == Stream::kLabel) slot = &p.label;
    if (e.stream == Stream::kRationale) slot = &p.rationale;
    if (slot == nullptr || *slot != nullptr) {
      throw Error(ErrorCode::kUnpairedStream,
                  *e.batch_id + ": unexpected or duplicated " + std::string(to_string(e.stream)) +
                      " stream");
    }
    if ((p.label && p.label->sample_id != e.sample_id) ||
        (p.rationale && p.rationale->sample_id != e.sample_id)) {
      throw Error(ErrorCode::kUnpairedStream, *e.batch_id + ": streams from different samples");
    }
    *slot = &e;
  }
  std::vector<Batch> batches;
  std::size_t in_group = 0;
  for (const auto& [id, p] : pairs) {
    if (!p.label || !p.rationale) {
      throw Error(ErrorCode::kUnpairedStream,
                  id + ": missing " + std::string(p.label ? "rationale" : "label") + " stream");
    }
    if (pairs_per_batch == 1) {
      batches.push_back(Batch{id, {*p.label, *p.rationale}});
      continue;
    }
    if (in_group == 0) batches.push_back(Batch{batch_name("align-group-", batches.size()), {}});
    batches.back().examples.push_back(*p.label);
    batches.back().examples.push_back(*p.rationale);
    in_group = (in_group + 1) % pairs_per_batch;
  }
  return batches;
}

void assign_mix_batch_ids(std::vector<TrainingExample>& examples,
                          std::span<const Batch> batches) {
  std::map<std::pair<std::string, Stream>, std::string> ids;
  for (const auto& b : batches) {
    for (const auto& e : b.examples) ids[{e.sample_id, e.stream}] = b.id;
  }
  for (auto& e : examples) {
    auto it = ids.find({e.sample_id, e.stream});
    if (it != ids.end()) e.batch_id = it->second;
  }
}

std::filesystem::path training_file(const std::filesystem::path& dir, Method method) {
  return dir / ("train_" + std::string(to_string(method)) + ".jsonl");
}

void write_examples(const std::filesystem::path& path, std::span<const TrainingExample> examples) {
  std::vector<json> rows;
  rows.reserve(examples.size());
  for (const auto& e : examples) rows.push_back(example_to_json(e));
  write_jsonl(path, rows);
}

std::vector<TrainingExample> read_examples(const std::filesystem::path& path) {
  std::vector<TrainingExample> out;
  for (const auto& row : read_jsonl(path)) out.push_back(example_from_json(row));
  return out;
}

}  // namespace rforge
