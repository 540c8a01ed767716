#include "rforge/mock_providers.hpp"

#include "rforge/answer.hpp"
#include "rforge/corpus.hpp"
#include "rforge/error.hpp"
#include "rforge/hash.hpp"
#include "rforge/text.hpp"

namespace rforge {

namespace {

// Deterministic draw in [0, 1) for a request identity.
double unit(std::string_view key, std::uint64_t salt) {
  return static_cast<double>(fnv1a64(key, salt) >> 11) * 0x1.0p-53;
}

std::string meta_string(const json& meta, const char* key) {
  auto it = meta.find(key);
  return it != meta.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::vector<std::string> meta_labels(const json& meta) {
  auto it = meta.find("label_space");
  if (it == meta.end() || !it->is_array()) return {};
  return it->get<std::vector<std::string>>();
}

// Any label other than `label`, chosen by hash.
std::string other_label(const std::vector<std::string>& space, const std::string& label,
                        std::uint64_t h) {
  std::vector<std::string> others;
  for (const auto& l : space) {
    if (l != label) others.push_back(l);
  }
  if (others.empty()) return label;
  return others[h % others.size()];
}

// A plausible wrong span answer: the reference without its last span.
std::string degrade_spans(const std::string& label) {
  auto spans = parse_span_text(label);
  if (!spans.empty()) spans.pop_back();
  return label_text(Label(spans));
}

std::string excerpt(const std::string& input, std::size_t max_cp) {
  auto line = input;
  const auto nl = line.find('\n');
  if (nl != std::string::npos) line.resize(nl);
  const auto colon = line.find(": ");
  if (colon != std::string::npos) line = line.substr(colon + 2);
  auto cps = text::decode_utf8(text::trim(line));
  if (cps.size() > max_cp) cps.resize(max_cp);
  return text::encode_utf8(cps);
}

Language meta_language(const json& meta) {
  const auto s = meta_string(meta, "language");
  return s.empty() ? Language::kEn : parse_language(s);
}

std::string rationale_body_text(Language lang, const std::string& input, const std::string& label,
                                std::uint64_t h) {
  const auto x = excerpt(input, 40);
  if (lang == Language::kZh) {
    static const char* kOpeners[] = {"输入提到“%X”。", "文本描述了“%X”。", "题目询问“%X”。",
                                     "句子表达了“%X”。"};
    static const char* kMiddles[] = {"分析其中的关键信息，可以看出答案倾向于%L。",
                                     "考虑上下文的含义，内容指向%L。",
                                     "比较各个选项的含义，最符合的是%L。",
                                     "理解整体语境后，判断结果为%L。"};
    std::string s = std::string(kOpeners[h % 4]) + kMiddles[(h >> 8) % 4];
    text::replace_all(s, "%X", x);
    text::replace_all(s, "%L", label);
    return s;
  }
  static const char* kOpeners[] = {"The input mentions \"%X\".", "The text describes \"%X\".",
                                   "The question asks about \"%X\".",
                                   "The sentence expresses \"%X\"."};
  static const char* kMiddles[] = {" Analyzing the key information shows that the answer leans toward %L.",
                                   " Considering the context, the content points to %L.",
                                   " Comparing the options, the closest match is %L.",
                                   " Understanding the overall meaning leads to %L."};
  std::string s = std::string(kOpeners[h % 4]) + kMiddles[(h >> 8) % 4];
  text::replace_all(s, "%X", x);
  text::replace_all(s, "%L", label);
  return s;
}

}  // namespace

MockJudgeClient::MockJudgeClient(std::string name, double error_rate, double abstain_rate)
    : name_(std::move(name)), error_rate_(error_rate), abstain_rate_(abstain_rate) {}

ChatResponse MockJudgeClient::complete(const ChatRequest& request) {
  const auto& meta = request.metadata;
  const auto id = meta_string(meta, "sample_id");
  const auto ref = meta_string(meta, "reference_label");
  const auto key = name_ + "/" + id;
  const double u = unit(key, 0x6a75646765ULL);
  if (u < abstain_rate_) return {"I am not sure about this one.", false};
  if (u < abstain_rate_ + error_rate_) {
    const auto space = meta_labels(meta);
    return {space.empty() ? degrade_spans(ref) : other_label(space, ref, fnv1a64(key, 7)),
            false};
  }
  return {ref, false};
}

MockGeneratorClient::MockGeneratorClient(std::string name, double fault_rate)
    : name_(std::move(name)), fault_rate_(fault_rate) {}

ChatResponse MockGeneratorClient::complete(const ChatRequest& request) {
  const auto& meta = request.metadata;
  const auto id = meta_string(meta, "sample_id");
  const auto ref = meta_string(meta, "reference_label");
  const auto input = meta_string(meta, "input");
  const auto lang = meta_language(meta);
  const auto key = name_ + "/" + id;
  const double u = unit(key, 0x72617469ULL);
  const std::uint64_t h = fnv1a64(key, 11);
  const auto body = rationale_body_text(lang, input, ref, h);

  if (u < fault_rate_) {
    return {lang == Language::kZh ? "抱歉，我无法回答这个问题。" : "I cannot answer this request.",
            true};
  }
  if (u < 2 * fault_rate_) {
    std::string longer;
    for (int i = 0; i < 150; ++i) longer += body + (lang == Language::kZh ? "" : " ");
    return {longer + "\n" + answer_sentence(lang, ref), false};
  }
  if (u < 3 * fault_rate_) {
    const auto space = meta_labels(meta);
    const auto wrong = space.empty() ? degrade_spans(ref) : other_label(space, ref, h);
    return {body + "\n" + answer_sentence(lang, wrong), false};
  }
  if (u < 4 * fault_rate_) {
    const auto leak = lang == Language::kZh ? "这一分析支持给定的标签。"
                                            : " This reasoning supports the given label.";
    return {body + leak + "\n" + answer_sentence(lang, ref), false};
  }
  return {body + "\n" + answer_sentence(lang, ref), false};
}

MockInferenceClient::MockInferenceClient(std::string name) : name_(std::move(name)) {}

double MockInferenceClient::accuracy(const std::string& method, const std::string& mode) {
  double base = 0.70;
  if (method == "reason") base = 0.68;
  if (method == "explain") base = 0.72;
  if (method == "mix") base = 0.74;
  if (method == "align") base = 0.78;
  if (mode == "cot") base -= 0.02;
  if (mode == "rationalize") base += 0.01;
  return base;
}

ChatResponse MockInferenceClient::complete(const ChatRequest& request) {
  const auto& meta = request.metadata;
  const auto id = meta_string(meta, "sample_id");
  const auto ref = meta_string(meta, "reference_label");
  const auto method = meta_string(meta, "method");
  const auto mode = meta_string(meta, "mode");
  const auto run = meta_string(meta, "run");
  const auto lang = meta_language(meta);
  const auto key = name_ + "/" + id + "/" + method + "/" + mode + "/" + run;
  const std::uint64_t h = fnv1a64(key, 13);

  std::string answer = ref;
  if (unit(key, 0x696e6665ULL) >= accuracy(method, mode)) {
    const auto space = meta_labels(meta);
    answer = space.empty() ? degrade_spans(ref) : other_label(space, ref, h);
  }
  const auto body = rationale_body_text(lang, meta_string(meta, "input"), answer, h);
  if (mode == "cot") return {body + "\n" + answer_sentence(lang, answer), false};
  if (mode == "rationalize") return {answer + "\n" + body, false};
  return {answer, false};
}

MockSuite MockSuite::make(const std::vector<std::string>& judge_names,
                          std::size_t embedding_dim) {
  if (judge_names.size() != 3) {
    throw Error(ErrorCode::kInvalidConfig, "mock suite needs exactly three judge names");
  }
  static const double kErrorRates[] = {0.05, 0.10, 0.15};
  MockSuite suite;
  for (std::size_t i = 0; i < 3; ++i) {
    suite.judges.push_back(std::make_shared<CountingChatClient>(
        std::make_shared<MockJudgeClient>(judge_names[i], kErrorRates[i], 0.01)));
  }
  suite.generator = std::make_shared<CountingChatClient>(
      std::make_shared<MockGeneratorClient>("mock-generator"));
  suite.inference = std::make_shared<CountingChatClient>(
      std::make_shared<MockInferenceClient>("mock-model"));
  suite.embedding = std::make_shared<HashingEmbeddingClient>(embedding_dim);
  return suite;
}

std::size_t MockSuite::chat_calls() const {
  std::size_t n = generator->calls() + inference->calls();
  for (const auto& j : judges) n += j->calls();
  return n;
}

}  // namespace rforge
