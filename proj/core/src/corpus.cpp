#include "rforge/corpus.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "rforge/error.hpp"
#include "rforge/hash.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/rng.hpp"
#include "rforge/text.hpp"

namespace rforge {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<TaskFamily, std::string_view> kFamilies[] = {
    {TaskFamily::kSentiment, "sentiment"},
    {TaskFamily::kStance, "stance"},
    {TaskFamily::kNli, "nli"},
    {TaskFamily::kParaphrase, "paraphrase"},
    {TaskFamily::kCoreference, "coreference"},
    {TaskFamily::kReadingComprehension, "reading_comprehension"},
    {TaskFamily::kTopic, "topic"},
    {TaskFamily::kRcCommonSense, "rc_common_sense"},
    {TaskFamily::kCommonSense, "common_sense"},
    {TaskFamily::kLinguistics, "linguistics"},
    {TaskFamily::kNer, "ner"},
};

}  // namespace

std::string_view to_string(TaskFamily family) {
  for (const auto& [f, name] : kFamilies) {
    if (f == family) return name;
  }
  return "unknown";
}

std::string_view to_string(Metric metric) {
  return metric == Metric::kAccuracy ? "accuracy" : "span_f1";
}

std::string_view to_string(Language language) {
  return language == Language::kZh ? "zh" : "en";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

TaskFamily parse_task_family(std::string_view s) {
  for (const auto& [f, name] : kFamilies) {
    if (name == s) return f;
  }
  throw Error(ErrorCode::kInvalidRecord, "unknown task family '" + std::string(s) + "'");
}

Language parse_language(std::string_view s) {
  if (s == "zh") return Language::kZh;
  if (s == "en") return Language::kEn;
  throw Error(ErrorCode::kInvalidRecord, "unknown language '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev" || s == "validation" || s == "valid") return Split::kDev;
  if (s == "test") return Split::kTest;
  if (s == "unassigned" || s.empty()) return Split::kUnassigned;
  throw Error(ErrorCode::kInvalidRecord, "unknown split '" + std::string(s) + "'");
}

TaskKind TaskKind::make(TaskFamily family, bool span_extraction) {
  const bool span = family == TaskFamily::kNer ||
                    (family == TaskFamily::kReadingComprehension && span_extraction);
  return TaskKind{family, span ? Metric::kSpanF1 : Metric::kAccuracy};
}

// ---------------------------------------------------------------------------
// Labels

bool is_span_label(const Label& label) {
  return std::holds_alternative<std::vector<Span>>(label);
}

std::string label_text(const Label& label) {
  if (const auto* s = std::get_if<std::string>(&label)) return *s;
  std::vector<std::string> parts;
  for (const auto& span : std::get<std::vector<Span>>(label)) {
    parts.push_back(span.type + ":" + span.text);
  }
  return text::join(parts, "; ");
}

std::vector<Span> parse_span_text(std::string_view input) {
  // Accept ASCII and full-width separators.
  std::string normalized;
  normalized.reserve(input.size());
  const auto cps = text::decode_utf8(input);
  std::u32string buf;
  for (char32_t c : cps) {
    if (c == U'；') c = U';';
    if (c == U'：') c = U':';
    buf.push_back(c);
  }
  normalized = text::encode_utf8(buf);
  std::vector<Span> out;
  for (const auto& piece : text::split(normalized, ';')) {
    const auto item = text::trim(piece);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      out.push_back(Span{"", item, std::nullopt});
      continue;
    }
    out.push_back(Span{text::trim(item.substr(0, colon)),
                       text::trim(item.substr(colon + 1)), std::nullopt});
  }
  return out;
}

namespace {

json span_to_json(const Span& span) {
  json j{{"type", span.type}, {"text", span.text}};
  if (span.offsets) {
    j["start"] = span.offsets->first;
    j["end"] = span.offsets->second;
  }
  return j;
}

Span span_from_json(const json& j) {
  Span span;
  span.type = j.value("type", "");
  span.text = text::trim(text::nfc(j.at("text").get<std::string>()));
  if (j.contains("start") && j.contains("end")) {
    span.offsets = std::make_pair(j.at("start").get<std::size_t>(),
                                  j.at("end").get<std::size_t>());
  }
  return span;
}

json label_to_json(const Label& label) {
  if (const auto* s = std::get_if<std::string>(&label)) return *s;
  json arr = json::array();
  for (const auto& span : std::get<std::vector<Span>>(label)) {
    arr.push_back(span_to_json(span));
  }
  return arr;
}

Label label_from_json(const json& j, bool span_task) {
  if (j.is_array()) {
    std::vector<Span> spans;
    for (const auto& item : j) spans.push_back(span_from_json(item));
    return spans;
  }
  if (!j.is_string()) {
    throw Error(ErrorCode::kInvalidRecord, "label must be a string or span list");
  }
  auto value = text::trim(text::nfc(j.get<std::string>()));
  if (span_task) {
    // Free-text answers of span-extraction reading comprehension.
    return std::vector<Span>{Span{"ANSWER", value, std::nullopt}};
  }
  return value;
}

}  // namespace

// ---------------------------------------------------------------------------
// DatasetSpec

bool DatasetSpec::has_label(std::string_view label) const {
  return std::find(label_space.begin(), label_space.end(), label) != label_space.end();
}

std::string DatasetSpec::display_name(const std::string& field) const {
  auto it = field_display.find(field);
  return it == field_display.end() ? field : it->second;
}

void DatasetSpec::validate() const {
  if (name.empty()) throw Error(ErrorCode::kInvalidRecord, "dataset name is empty");
  if (input_schema.empty()) {
    throw Error(ErrorCode::kInvalidRecord, name + ": input_schema is empty");
  }
  std::set<std::string> seen;
  for (const auto& label : label_space) {
    if (!seen.insert(label).second) {
      throw Error(ErrorCode::kInvalidRecord, name + ": duplicate label '" + label + "'");
    }
  }
  for (const auto& [label, _] : criteria) {
    if (!seen.count(label)) {
      throw Error(ErrorCode::kInvalidRecord,
                  name + ": criteria for label '" + label + "' outside label space");
    }
  }
  if (task.metric != TaskKind::make(task.family, label_space.empty()).metric) {
    throw Error(ErrorCode::kInvalidRecord, name + ": metric inconsistent with task");
  }
}

void to_json(json& j, const DatasetSpec& spec) {
  j = json{{"name", spec.name},
           {"task", std::string(to_string(spec.task.family))},
           {"metric", std::string(to_string(spec.task.metric))},
           {"language", std::string(to_string(spec.language))},
           {"label_space", spec.label_space},
           {"criteria", spec.criteria},
           {"input_schema", spec.input_schema},
           {"field_display", spec.field_display},
           {"instruction", spec.instruction},
           {"label_name", spec.label_name},
           {"description", spec.description}};
}

void from_json(const json& j, DatasetSpec& spec) {
  spec.name = j.at("name").get<std::string>();
  spec.language = parse_language(j.value("language", "zh"));
  spec.label_space = j.value("label_space", std::vector<std::string>{});
  for (auto& label : spec.label_space) label = text::trim(text::nfc(label));
  spec.task = TaskKind::make(parse_task_family(j.at("task").get<std::string>()),
                             spec.label_space.empty());
  spec.criteria = j.value("criteria", std::map<std::string, std::string>{});
  spec.input_schema = j.at("input_schema").get<std::vector<std::string>>();
  spec.field_display = j.value("field_display", std::map<std::string, std::string>{});
  spec.instruction = j.value("instruction", "");
  spec.label_name = j.value("label_name", spec.language == Language::kZh ? "答案" : "Answer");
  spec.description = j.value("description", "");
  spec.validate();
}

DatasetSpec load_dataset_spec(const fs::path& path) {
  return read_json_file(path).get<DatasetSpec>();
}

// ---------------------------------------------------------------------------
// Samples

json sample_to_json(const Sample& sample) {
  return json{{"id", sample.id},
              {"dataset", sample.dataset},
              {"fields", sample.fields},
              {"label", label_to_json(sample.label)},
              {"split", std::string(to_string(sample.split))}};
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.dataset = j.value("dataset", "");
  s.fields = j.at("fields").get<std::map<std::string, std::string>>();
  const auto& label = j.at("label");
  s.label = label.is_array() ? label_from_json(label, true) : Label(label.get<std::string>());
  s.split = parse_split(j.value("split", "unassigned"));
  return s;
}

std::string canonical_form(const std::map<std::string, std::string>& fields) {
  std::string out;
  for (const auto& [name, value] : fields) {  // std::map iterates sorted by name
    out += name;
    out += '\x1F';
    out += text::trim(text::nfc(value));
    out += '\x1E';
  }
  return out;
}

std::string sample_id_for(const std::map<std::string, std::string>& fields) {
  return sha256_hex(canonical_form(fields)).substr(0, 16);
}

std::string render_input(const Sample& sample, const DatasetSpec& spec) {
  std::string out;
  for (const auto& field : spec.input_schema) {
    auto it = sample.fields.find(field);
    if (!out.empty()) out += '\n';
    out += spec.display_name(field) + ": " + (it == sample.fields.end() ? "" : it->second);
  }
  return out;
}

std::string label_choices(const DatasetSpec& spec) {
  const bool zh = spec.language == Language::kZh;
  const auto& labels = spec.label_space;
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) {
      if (i + 1 == labels.size()) {
        out += zh ? "或者" : " or ";
      } else {
        out += zh ? "、" : ", ";
      }
    }
    out += labels[i];
  }
  return out;
}

std::string label_name(const DatasetSpec& spec) {
  if (!spec.label_name.empty()) return spec.label_name;
  return spec.language == Language::kZh ? "标签" : "Label";
}

std::string task_instruction(const DatasetSpec& spec) {
  if (!spec.instruction.empty()) return spec.instruction;
  return spec.language == Language::kZh
             ? "判断下面输入的" + label_name(spec)
             : "Determine the " + label_name(spec) + " of the following input";
}

std::string as_sentence(std::string_view s, Language language) {
  std::string out = text::trim(s);
  const auto cps = text::decode_utf8(out);
  constexpr std::u32string_view kEnd = U".。!！?？:：";
  if (!cps.empty() && kEnd.find(cps.back()) == std::u32string_view::npos) {
    out += language == Language::kZh ? "。" : ".";
  }
  return out;
}

std::vector<Sample> ingest_dataset(std::span<const json> raw_records,
                                   const DatasetSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(raw_records.size());
  for (std::size_t i = 0; i < raw_records.size(); ++i) {
    const json& record = raw_records[i];
    const std::string where = spec.name + " record " + std::to_string(i);
    // Accept both flat raw records and the collection-store shape.
    const json& source = record.contains("fields") && record.at("fields").is_object()
                             ? record.at("fields")
                             : record;
    Sample sample;
    sample.dataset = spec.name;
    for (const auto& field : spec.input_schema) {
      if (!source.contains(field) || !source.at(field).is_string()) {
        throw Error(ErrorCode::kMissingField, where + ": missing field '" + field + "'");
      }
      sample.fields[field] = text::trim(text::nfc(source.at(field).get<std::string>()));
    }
    if (!record.contains("label")) {
      throw Error(ErrorCode::kMissingField, where + ": missing field 'label'");
    }
    sample.label = label_from_json(record.at("label"), spec.is_span_task());
    if (!spec.is_span_task()) {
      if (is_span_label(sample.label)) {
        throw Error(ErrorCode::kUnknownLabel, where + ": span label for a labelled task");
      }
      const auto& label = std::get<std::string>(sample.label);
      if (!spec.has_label(label)) {
        throw Error(ErrorCode::kUnknownLabel, where + ": label '" + label + "'");
      }
    }
    if (record.contains("split") && record.at("split").is_string()) {
      sample.split = parse_split(record.at("split").get<std::string>());
    }
    sample.id = sample_id_for(sample.fields);
    out.push_back(std::move(sample));
  }
  return out;
}

SplitCounts split_counts(std::size_t n) {
  SplitCounts c;
  c.dev = n / 10;
  c.test = n / 10;
  c.train = n - c.dev - c.test;
  return c;
}

std::vector<Split> split_dataset(std::span<const Sample> samples, std::uint64_t seed) {
  std::size_t marked = 0;
  for (const auto& s : samples) {
    if (s.split != Split::kUnassigned) ++marked;
  }
  if (marked == samples.size()) {
    std::vector<Split> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.split);
    return out;
  }
  if (marked != 0) {
    throw Error(ErrorCode::kMixedSplitMarkers,
                std::to_string(marked) + " of " + std::to_string(samples.size()) +
                    " samples carry split markers");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].id < samples[b].id;
  });
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto counts = split_counts(samples.size());
  std::vector<Split> out(samples.size(), Split::kTrain);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    Split s = Split::kTrain;
    if (rank < counts.dev) {
      s = Split::kDev;
    } else if (rank < counts.dev + counts.test) {
      s = Split::kTest;
    }
    out[order[rank]] = s;
  }
  return out;
}

std::size_t ValidationReport::count(IssueKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      issues.begin(), issues.end(), [&](const ValidationIssue& i) { return i.kind == kind; }));
}

ValidationReport validate_collection(std::span<const Sample> collection,
                                     const DatasetSpec& spec) {
  ValidationReport report;
  std::unordered_map<std::string, Split> first_split;
  std::size_t per_split[3] = {0, 0, 0};
  for (const auto& s : collection) {
    if (s.split != Split::kUnassigned) ++per_split[static_cast<int>(s.split)];
    auto [it, inserted] = first_split.emplace(s.id, s.split);
    if (!inserted && it->second != s.split) {
      report.issues.push_back({IssueKind::kSplitLeakage, s.id,
                               std::string("present in ") +
                                   std::string(to_string(it->second)) + " and " +
                                   std::string(to_string(s.split))});
    }
    if (spec.is_span_task() != is_span_label(s.label) ||
        (!spec.is_span_task() && !spec.has_label(std::get<std::string>(s.label)))) {
      report.issues.push_back(
          {IssueKind::kLabelViolation, s.id, "label '" + label_text(s.label) + "'"});
    }
  }
  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    if (per_split[static_cast<int>(split)] == 0) {
      report.issues.push_back(
          {IssueKind::kEmptySplit, "", std::string(to_string(split)) + " is empty"});
    }
  }
  return report;
}

void require_valid(const ValidationReport& report, std::string_view dataset) {
  if (report.ok()) return;
  std::string msg = std::string(dataset) + ": " + std::to_string(report.issues.size()) +
                    " validation issue(s)";
  for (std::size_t i = 0; i < report.issues.size() && i < 5; ++i) {
    msg += "; " + report.issues[i].sample_id + " " + report.issues[i].detail;
  }
  throw Error(ErrorCode::kValidationFailed, msg);
}

void write_collection(const fs::path& dir, const DatasetSpec& spec,
                      std::span<const Sample> samples) {
  const auto base = dir / spec.name;
  fs::create_directories(base);
  write_json_file(base / "spec.json", json(spec));
  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    std::vector<json> rows;
    for (const auto& s : samples) {
      if (s.split == split) rows.push_back(sample_to_json(s));
    }
    write_jsonl(base / (std::string(to_string(split)) + ".jsonl"), rows);
  }
}

std::vector<Sample> read_split(const fs::path& dir, const std::string& dataset,
                               Split split) {
  std::vector<Sample> out;
  const auto path = dir / dataset / (std::string(to_string(split)) + ".jsonl");
  if (!fs::exists(path)) return out;
  for (const auto& row : read_jsonl(path)) out.push_back(sample_from_json(row));
  return out;
}

std::vector<Sample> read_collection(const fs::path& dir, const std::string& dataset) {
  std::vector<Sample> out;
  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    auto part = read_split(dir, dataset, split);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace rforge
