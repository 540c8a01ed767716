#include "rforge/evalsuite.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_map>

#include "rforge/concurrency.hpp"
#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/text.hpp"

namespace rforge {

std::string_view to_string(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::kDirect: return "direct";
    case InferenceMode::kCot: return "cot";
    case InferenceMode::kRationalize: return "rationalize";
  }
  return "direct";
}

InferenceMode parse_inference_mode(std::string_view s) {
  if (s == "direct") return InferenceMode::kDirect;
  if (s == "cot") return InferenceMode::kCot;
  if (s == "rationalize") return InferenceMode::kRationalize;
  throw Error(ErrorCode::kInvalidRecord, "unknown inference mode '" + std::string(s) + "'");
}

std::vector<DecodingConfig> decoding_configs(InferenceMode mode) {
  if (mode == InferenceMode::kCot) {
    return {{"greedy", 0.0, std::nullopt}, {"sampled", 0.7, 0.9}};
  }
  return {{"greedy", 0.0, std::nullopt}};
}

ChatRequest build_inference_request(const Sample& sample, const DatasetSpec& spec,
                                    Method method, InferenceMode mode,
                                    const DecodingConfig& decoding,
                                    const TemplateRegistry& registry, const std::string& model) {
  TemplateKind kind = TemplateKind::kLabelOnly;
  if (mode == InferenceMode::kCot) kind = TemplateKind::kReason;
  if (mode == InferenceMode::kRationalize) kind = TemplateKind::kExplain;
  const auto instruction = render_instruction(spec, kind, registry);
  const auto input = render_example_input(sample, spec, mode == InferenceMode::kCot);

  ChatRequest req;
  req.model = model;
  req.temperature = decoding.temperature;
  req.top_p = decoding.top_p;
  req.messages.push_back({"user", instruction + "\n" + input});
  req.metadata = {{"task", "inference"},
                  {"dataset", spec.name},
                  {"sample_id", sample.id},
                  {"method", to_string(method)},
                  {"mode", to_string(mode)},
                  {"run", decoding.name},
                  {"language", to_string(spec.language)},
                  {"label_space", spec.label_space},
                  {"input", render_input(sample, spec)},
                  {"reference_label", label_text(sample.label)}};
  return req;
}

namespace {

bool is_step_terminator(char32_t c) {
  return c == U'.' || c == U'、' || c == U')' || c == U'．' || c == U'）' || c == U'：' ||
         c == U':';
}

// Position (in code points) of the first "1." / "1、" / "(1)" style marker
// that is not at the start of the line, or npos.
std::size_t step_marker(std::u32string_view line) {
  for (std::size_t i = 1; i < line.size(); ++i) {
    const char32_t c = line[i];
    const bool one = c == U'1' || c == U'１';
    if (!one) continue;
    const char32_t prev = line[i - 1];
    if (prev == U'(' || prev == U'（') {
      if (i + 1 < line.size() && (line[i + 1] == U')' || line[i + 1] == U'）')) return i - 1;
      continue;
    }
    if (text::is_letter_or_digit(prev)) continue;
    if (i + 1 < line.size() && is_step_terminator(line[i + 1])) return i;
  }
  return std::u32string_view::npos;
}

std::optional<std::string> match_answer(std::string_view segment, const AnswerParser& parser) {
  if (parser.label_space.empty()) {
    const auto spans = parse_span_text(strip_trailing_punct(segment));
    if (spans.empty()) return std::nullopt;
    return label_text(Label(spans));
  }
  return match_label(segment, parser.label_space);
}

}  // namespace

std::string rationalize_segment(std::string_view output) {
  auto trimmed = text::trim(output);
  const auto nl = trimmed.find('\n');
  if (nl != std::string::npos) trimmed.resize(nl);
  const auto cps = text::decode_utf8(trimmed);
  const auto marker = step_marker(cps);
  if (marker == std::u32string_view::npos) return text::trim(trimmed);
  return text::trim(text::encode_utf8(std::u32string_view(cps).substr(0, marker)));
}

std::optional<std::string> parse_answer(std::string_view output, InferenceMode mode,
                                        const AnswerParser& parser) {
  try {
    switch (mode) {
      case InferenceMode::kDirect: return match_answer(text::trim(output), parser);
      case InferenceMode::kCot: return extract_final_answer(output, parser);
      case InferenceMode::kRationalize: return match_answer(rationalize_segment(output), parser);
    }
  } catch (const std::exception&) {
    // Malformed text (invalid UTF-8 and the like) scores as unparseable.
  }
  return std::nullopt;
}

namespace {

bool same_surface(const Span& a, const Span& b) { return a.type == b.type && a.text == b.text; }

}  // namespace

std::size_t span_matches(std::span<const Span> predicted, std::span<const Span> gold) {
  std::vector<char> used(gold.size(), 0);
  std::vector<char> matched(predicted.size(), 0);
  std::size_t hits = 0;
  // Exact triples first so offset-less spans cannot steal a gold span that an
  // offset-carrying prediction needs.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      if (matched[i]) continue;
      for (std::size_t j = 0; j < gold.size(); ++j) {
        if (used[j] || !same_surface(predicted[i], gold[j])) continue;
        const auto& po = predicted[i].offsets;
        const auto& go = gold[j].offsets;
        const bool ok = pass == 0 ? (po.has_value() == go.has_value() && po == go)
                                  : (!po.has_value() || !go.has_value());
        if (!ok) continue;
        used[j] = 1;
        matched[i] = 1;
        ++hits;
        break;
      }
    }
  }
  return hits;
}

namespace {

SpanScore prf(std::size_t hits, std::size_t n_pred, std::size_t n_gold) {
  if (n_pred == 0 && n_gold == 0) return {1.0, 1.0, 1.0};
  if (n_pred == 0 || n_gold == 0) return {0.0, 0.0, 0.0};
  SpanScore s;
  s.precision = static_cast<double>(hits) / static_cast<double>(n_pred);
  s.recall = static_cast<double>(hits) / static_cast<double>(n_gold);
  s.f1 = hits == 0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace

SpanScore span_f1(std::span<const Span> predicted, std::span<const Span> gold) {
  return prf(span_matches(predicted, gold), predicted.size(), gold.size());
}

double score_dataset(std::span<const std::optional<std::string>> predictions,
                     std::span<const std::string> golds, Metric metric) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predictions.size()) +
                                                " predictions for " +
                                                std::to_string(golds.size()) + " golds");
  }
  if (golds.empty()) return 0.0;
  if (metric == Metric::kAccuracy) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      if (predictions[i] && *predictions[i] == golds[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(golds.size());
  }
  std::size_t hits = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto gold = parse_span_text(golds[i]);
    const auto pred = predictions[i] ? parse_span_text(*predictions[i]) : std::vector<Span>{};
    hits += span_matches(pred, gold);
    n_pred += pred.size();
    n_gold += gold.size();
  }
  return prf(hits, n_pred, n_gold).f1;
}

double macro_average(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyScoreSet, "macro average of no scores");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------------------
// Diversity

namespace {

const std::vector<std::string>& english_verbs() {
  static const std::vector<std::string> kVerbs = {
      "analyze", "ask",      "check",    "compare",  "conclude", "consider", "contain",
      "describe", "determine", "emphasize", "evaluate", "examine", "explain", "express",
      "focus",   "identify", "imply",    "indicate", "inquire",  "involve",  "judge",
      "lead",    "match",    "mean",     "mention",  "need",     "observe",  "provide",
      "read",    "refer",    "reflect",  "require",  "seek",     "show",     "state",
      "suggest", "support",  "understand"};
  return kVerbs;
}

const std::vector<std::string>& chinese_verbs() {
  static const std::vector<std::string> kVerbs = {
      "分析", "比较", "判断", "表达", "询问", "考虑", "表明", "说明", "显示", "描述", "提到",
      "包含", "涉及", "理解", "观察", "阅读", "得出", "认为", "指出", "关注", "提供", "寻求",
      "识别", "解释", "强调", "需要", "反映", "评估", "检查", "确定", "讨论", "提出"};
  return kVerbs;
}

const std::set<std::string>& english_stopwords() {
  static const std::set<std::string> kStop = {
      "the", "a",    "an",   "of",    "to",   "that", "this",  "these", "those", "is",
      "are", "was",  "were", "be",    "whether", "with", "and", "or",  "it",    "its",
      "their", "both", "two", "for",  "in",   "on",   "at",    "by",    "as",    "if",
      "not", "what", "which", "how",  "why",  "from", "into",  "about", "all",   "any",
      "they", "them", "there", "then", "than", "so",  "such",  "very",  "also",  "more"};
  return kStop;
}

std::optional<std::string> english_lemma(const std::string& word) {
  for (const auto& lemma : english_verbs()) {
    if (word == lemma) return lemma;
    if (word.rfind(lemma, 0) == 0) {
      const auto suffix = word.substr(lemma.size());
      if (suffix == "s" || suffix == "es" || suffix == "ed" || suffix == "d" ||
          suffix == "ing") {
        return lemma;
      }
    }
    if (lemma.back() == 'e') {
      const auto stem = lemma.substr(0, lemma.size() - 1);
      if (word == stem + "ing" || word == stem + "ed") return lemma;
    }
  }
  return std::nullopt;
}

bool is_word(const std::string& seg) {
  const auto cps = text::decode_utf8(seg);
  return !cps.empty() && std::all_of(cps.begin(), cps.end(), text::is_letter_or_digit);
}

std::vector<std::string> sentences(const std::string& text) {
  std::vector<std::string> out;
  const auto cps = text::decode_utf8(text);
  std::u32string cur;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    const bool stop = c == U'。' || c == U'！' || c == U'？' || c == U'!' || c == U'?' ||
                      c == U'\n' || c == U'；' ||
                      (c == U'.' && (i + 1 == cps.size() || text::is_white_space(cps[i + 1])));
    if (stop) {
      if (!cur.empty()) out.push_back(text::encode_utf8(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(text::encode_utf8(cur));
  return out;
}

}  // namespace

std::vector<VerbObject> NaiveParseProvider::parse(const std::string& input) {
  std::vector<VerbObject> out;
  const auto& zh_verbs = chinese_verbs();
  for (const auto& sentence : sentences(input)) {
    std::vector<std::string> words;
    for (auto& seg : text::word_segments(sentence)) {
      if (is_word(seg)) words.push_back(text::ascii_lower(seg));
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
      std::optional<std::string> verb;
      const bool cjk = text::is_cjk(text::decode_utf8(words[i]).front());
      if (cjk) {
        if (std::find(zh_verbs.begin(), zh_verbs.end(), words[i]) != zh_verbs.end()) {
          verb = words[i];
        }
      } else {
        verb = english_lemma(words[i]);
      }
      if (!verb) continue;
      std::string object;
      for (std::size_t j = i + 1; j < words.size(); ++j) {
        const auto& w = words[j];
        const auto cps = text::decode_utf8(w);
        if (text::is_cjk(cps.front())) {
          if (cps.size() >= 2 &&
              std::find(zh_verbs.begin(), zh_verbs.end(), w) == zh_verbs.end()) {
            object = w;
            break;
          }
        } else if (w.size() >= 3 && !english_stopwords().count(w) && !english_lemma(w) &&
                   !std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); })) {
          object = w;
          break;
        }
      }
      out.push_back(VerbObject{*verb, object});
      break;
    }
  }
  return out;
}

std::vector<VerbObject> HttpParseProvider::parse(const std::string& input) {
  json body;
  try {
    body = post_json(endpoint_, {{"text", input}});
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseProviderUnavailable, e.what());
  }
  std::vector<VerbObject> out;
  for (const auto& p : body.value("pairs", json::array())) {
    out.push_back(VerbObject{p.value("verb", std::string()), p.value("object", std::string())});
  }
  return out;
}

json DiversityReport::to_json() const {
  json verbs_json = json::array();
  for (const auto& v : verbs) {
    json objects = json::array();
    for (const auto& [o, c] : v.objects) objects.push_back({{"object", o}, {"count", c}});
    verbs_json.push_back({{"verb", v.verb}, {"count", v.count}, {"objects", objects}});
  }
  return {{"provider", provider}, {"fallback_used", fallback_used}, {"verbs", verbs_json}};
}

DiversityReport diversity_report(std::span<const std::string> rationales,
                                 ParseProvider* provider, ParseProvider& fallback,
                                 std::size_t top_verbs, std::size_t top_objects) {
  DiversityReport report;
  std::vector<std::vector<VerbObject>> parses(rationales.size());
  auto run = [&](ParseProvider& p) {
    std::unordered_map<std::string, std::vector<VerbObject>> cache;
    for (std::size_t i = 0; i < rationales.size(); ++i) {
      auto it = cache.find(rationales[i]);
      if (it == cache.end()) it = cache.emplace(rationales[i], p.parse(rationales[i])).first;
      parses[i] = it->second;
    }
    report.provider = p.name();
  };
  if (provider != nullptr) {
    try {
      run(*provider);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParseProviderUnavailable &&
          e.code() != ErrorCode::kProviderFailure) {
        throw;
      }
      report.fallback_used = true;
      run(fallback);
    }
  } else {
    report.fallback_used = true;
    run(fallback);
  }

  std::map<std::string, std::map<std::string, std::size_t>> table;
  for (const auto& ps : parses) {
    for (const auto& vo : ps) {
      if (vo.verb.empty() || vo.object.empty()) continue;
      ++table[vo.verb][vo.object];
    }
  }
  for (const auto& [verb, objects] : table) {
    VerbBucket b;
    b.verb = verb;
    for (const auto& [o, c] : objects) {
      b.count += c;
      b.objects.emplace_back(o, c);
    }
    std::stable_sort(b.objects.begin(), b.objects.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    if (b.objects.size() > top_objects) b.objects.resize(top_objects);
    report.verbs.push_back(std::move(b));
  }
  std::stable_sort(report.verbs.begin(), report.verbs.end(),
                   [](const auto& x, const auto& y) { return x.count > y.count; });
  if (report.verbs.size() > top_verbs) report.verbs.resize(top_verbs);
  return report;
}

// ---------------------------------------------------------------------------
// Error annotations

std::string_view to_string(ErrorType type) {
  switch (type) {
    case ErrorType::kUnderstanding: return "understanding";
    case ErrorType::kLogical: return "logical";
    case ErrorType::kContext: return "context";
    case ErrorType::kLinguistic: return "linguistic";
  }
  return "understanding";
}

ErrorType parse_error_type(std::string_view s) {
  for (auto t : {ErrorType::kUnderstanding, ErrorType::kLogical, ErrorType::kContext,
                 ErrorType::kLinguistic}) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::kInvalidRecord, "unknown error type '" + std::string(s) + "'");
}

json annotation_to_json(const ErrorAnnotation& a) {
  return {{"case_id", a.case_id},
          {"error_type", to_string(a.error_type)},
          {"annotator", a.annotator},
          {"note", a.note}};
}

ErrorAnnotation annotation_from_json(const json& j) {
  ErrorAnnotation a;
  a.case_id = j.at("case_id").get<std::string>();
  a.error_type = parse_error_type(j.at("error_type").get<std::string>());
  a.annotator = j.value("annotator", std::string());
  a.note = j.value("note", std::string());
  return a;
}

std::vector<ErrorAnnotation> read_annotations(const std::filesystem::path& path) {
  std::vector<ErrorAnnotation> out;
  for (const auto& row : read_jsonl(path)) out.push_back(annotation_from_json(row));
  return out;
}

void write_annotations(const std::filesystem::path& path,
                       std::span<const ErrorAnnotation> annotations) {
  std::vector<json> rows;
  for (const auto& a : annotations) rows.push_back(annotation_to_json(a));
  write_jsonl(path, rows);
}

std::map<std::string, std::size_t> error_distribution(std::span<const ErrorAnnotation> a) {
  std::map<std::string, std::size_t> out;
  for (auto t : {ErrorType::kUnderstanding, ErrorType::kLogical, ErrorType::kContext,
                 ErrorType::kLinguistic}) {
    out[std::string(to_string(t))] = 0;
  }
  for (const auto& x : a) ++out[std::string(to_string(x.error_type))];
  return out;
}

// ---------------------------------------------------------------------------
// Predictions

json prediction_to_json(const Prediction& p) {
  return {{"sample_id", p.sample_id},
          {"mode", to_string(p.mode)},
          {"output_text", p.output_text},
          {"run", p.run}};
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  p.sample_id = j.at("sample_id").get<std::string>();
  p.mode = parse_inference_mode(j.at("mode").get<std::string>());
  p.output_text = j.at("output_text").get<std::string>();
  p.run = j.value("run", std::string("greedy"));
  return p;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  for (const auto& row : read_jsonl(path)) out.push_back(prediction_from_json(row));
  return out;
}

std::vector<ScoreCell> score_predictions(std::span<const Prediction> predictions,
                                         std::span<const Sample> test, const DatasetSpec& spec,
                                         const std::string& method) {
  std::vector<const Sample*> golds;
  for (const auto& s : test) golds.push_back(&s);
  std::sort(golds.begin(), golds.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  std::vector<std::string> gold_text;
  for (const auto* s : golds) gold_text.push_back(label_text(s->label));

  std::map<std::pair<InferenceMode, std::string>, std::unordered_map<std::string, const Prediction*>>
      groups;
  for (const auto& p : predictions) groups[{p.mode, p.run}][p.sample_id] = &p;

  const auto parser = AnswerParser::for_dataset(spec);
  std::map<InferenceMode, ScoreCell> cells;
  for (const auto& [key, by_id] : groups) {
    const auto& [mode, run] = key;
    std::vector<std::optional<std::string>> parsed;
    std::size_t unparseable = 0;
    for (const auto* s : golds) {
      auto it = by_id.find(s->id);
      std::optional<std::string> answer;
      if (it != by_id.end()) answer = parse_answer(it->second->output_text, mode, parser);
      if (!answer) ++unparseable;
      parsed.push_back(std::move(answer));
    }
    const double score = score_dataset(parsed, gold_text, spec.task.metric);
    auto& cell = cells[mode];
    const bool first = cell.runs.empty();
    cell.task = std::string(to_string(spec.task.family));
    cell.dataset = spec.name;
    cell.method = method;
    cell.mode = mode;
    cell.n = golds.size();
    cell.runs[run] = score;
    if (first || score > cell.score) {
      cell.score = score;
      cell.unparseable = unparseable;
    }
  }
  std::vector<ScoreCell> out;
  for (auto& [_, c] : cells) out.push_back(std::move(c));
  return out;
}

std::vector<MacroCell> macro_by_task(std::span<const ScoreCell> cells) {
  std::map<std::tuple<std::string, std::string, InferenceMode>, std::vector<double>> groups;
  for (const auto& c : cells) groups[{c.task, c.method, c.mode}].push_back(c.score);
  std::vector<MacroCell> out;
  for (const auto& [key, scores] : groups) {
    const auto& [task, method, mode] = key;
    out.push_back(MacroCell{task, method, mode, macro_average(scores), scores.size()});
  }
  return out;
}

json eval_report_json(std::span<const ScoreCell> cells) {
  std::vector<ScoreCell> sorted(cells.begin(), cells.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.task, a.dataset, a.method, a.mode) <
           std::tie(b.task, b.dataset, b.method, b.mode);
  });
  json per_dataset = json::array();
  std::set<std::string> datasets;
  std::set<std::string> methods;
  for (const auto& c : sorted) {
    json runs = json::object();
    for (const auto& [r, s] : c.runs) runs[r] = s;
    per_dataset.push_back({{"task", c.task},
                           {"dataset", c.dataset},
                           {"method", c.method},
                           {"mode", to_string(c.mode)},
                           {"runs", runs},
                           {"score", c.score},
                           {"n", c.n},
                           {"unparseable", c.unparseable}});
    datasets.insert(c.dataset);
    methods.insert(c.method);
  }
  json macro = json::array();
  for (const auto& m : macro_by_task(sorted)) {
    macro.push_back({{"task", m.task},
                     {"method", m.method},
                     {"mode", to_string(m.mode)},
                     {"score", m.score},
                     {"datasets", m.datasets}});
  }
  return {{"per_dataset", per_dataset},
          {"macro", macro},
          {"counts", {{"cells", sorted.size()},
                      {"datasets", datasets.size()},
                      {"methods", methods.size()}}}};
}

}  // namespace rforge
