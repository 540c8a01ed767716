#include "rforge/synth.hpp"

#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/rng.hpp"
#include "rforge/text.hpp"

namespace rforge {

namespace fs = std::filesystem;

const std::vector<std::string>& synthetic_kinds() {
  static const std::vector<std::string> kKinds = {"paraphrase_zh", "sentiment_en", "topic_zh",
                                                  "ner_zh"};
  return kKinds;
}

namespace {

template <std::size_t N>
const char* pick(const char* const (&items)[N], Rng& rng) {
  return items[rng.below(N)];
}

// Splits index i into mixed-radix digits so the first product-of-radices
// indices give distinct combinations.
std::vector<std::size_t> digits(std::size_t i, std::initializer_list<std::size_t> radices) {
  std::vector<std::size_t> out;
  for (auto r : radices) {
    out.push_back(i % r);
    i /= r;
  }
  out.push_back(i);  // overflow beyond the product
  return out;
}

std::string suffix(std::size_t overflow, Language lang) {
  if (overflow == 0) return "";
  return lang == Language::kZh ? "（" + std::to_string(overflow) + "）"
                               : " (" + std::to_string(overflow) + ")";
}

DatasetSpec paraphrase_spec() {
  DatasetSpec s;
  s.name = "synth_paraphrase_zh";
  s.task = TaskKind::make(TaskFamily::kParaphrase);
  s.language = Language::kZh;
  s.label_space = {"匹配", "不匹配"};
  s.criteria = {{"匹配", "两个问题询问的是同一件事，答案可以互相通用。"},
                {"不匹配", "两个问题关注的对象或意图不同，答案不能通用。"}};
  s.input_schema = {"question1", "question2"};
  s.field_display = {{"question1", "问题1"}, {"question2", "问题2"}};
  s.instruction = "判断下面两个问题的语义关系";
  s.label_name = "关系";
  return s;
}

json paraphrase_record(std::size_t i, Rng& rng) {
  static const char* const kSubjects[] = {"手机", "信用卡", "快递", "账户", "会员",
                                          "订单", "密码",   "发票", "积分", "优惠券"};
  static const char* const kVerbs[] = {"退款", "激活", "修改", "查询",
                                       "注销", "绑定", "升级", "取消"};
  static const char* const kAsks[] = {"怎么", "如何", "在哪里", "什么时候可以"};
  static const char* const kPolite[] = {"请问", "想问一下", "麻烦问下", "你好，"};
  static const char* const kTimes[] = {"", "今天", "周末", "晚上", "月底"};
  const auto d = digits(i, {10, 8, 4, 5});
  const std::string subject = kSubjects[d[0]];
  const std::string verb = kVerbs[d[1]];
  const std::string q1 = std::string(kTimes[d[3]]) + subject + kAsks[d[2]] + verb +
                         suffix(d[4], Language::kZh);
  const bool matched = rng.below(2) == 0;
  std::string q2;
  if (matched) {
    q2 = std::string(pick(kPolite, rng)) + subject + "要" + kAsks[(d[2] + 1) % 4] + verb;
  } else {
    q2 = std::string(pick(kPolite, rng)) + subject + kAsks[d[2]] + kVerbs[(d[1] + 3) % 8];
  }
  return {{"question1", q1}, {"question2", q2}, {"label", matched ? "匹配" : "不匹配"}};
}

DatasetSpec sentiment_spec() {
  DatasetSpec s;
  s.name = "synth_sentiment_en";
  s.task = TaskKind::make(TaskFamily::kSentiment);
  s.language = Language::kEn;
  s.label_space = {"Positive", "Negative"};
  s.criteria = {{"Positive", "The reviewer is satisfied and would recommend the product."},
                {"Negative", "The reviewer is dissatisfied or reports a problem."}};
  s.input_schema = {"review"};
  s.field_display = {{"review", "Review"}};
  s.instruction = "Determine the Sentiment of the following review";
  s.label_name = "Sentiment";
  return s;
}

json sentiment_record(std::size_t i, Rng& rng) {
  static const char* const kItems[] = {"blender", "headset", "backpack", "lamp",   "kettle",
                                       "monitor", "jacket",  "router",   "camera", "novel"};
  static const char* const kAspects[] = {"battery life", "build quality", "delivery",
                                         "price",        "design",        "customer service",
                                         "packaging",    "sound"};
  static const char* const kGood[] = {"excellent", "wonderful", "reliable", "impressive",
                                      "great"};
  static const char* const kBad[] = {"disappointing", "flimsy", "terrible", "unreliable",
                                     "awful"};
  static const char* const kOpeners[] = {"I bought this {item} last month.",
                                         "The {item} arrived on time.",
                                         "We have used the {item} for a week.",
                                         "My friend recommended the {item}."};
  const auto d = digits(i, {10, 8, 4, 5});
  const bool positive = rng.below(2) == 0;
  std::string review = kOpeners[d[2]];
  text::replace_all(review, "{item}", kItems[d[0]]);
  review += std::string(" The ") + kAspects[d[1]] + " is " +
            (positive ? kGood[d[3]] : kBad[d[3]]) + ".";
  review += positive ? " I would buy it again." : " I regret this purchase.";
  review += suffix(d[4], Language::kEn);
  return {{"review", review}, {"label", positive ? "Positive" : "Negative"}};
}

DatasetSpec topic_spec() {
  DatasetSpec s;
  s.name = "synth_topic_zh";
  s.task = TaskKind::make(TaskFamily::kTopic);
  s.language = Language::kZh;
  s.label_space = {"体育", "财经", "科技", "娱乐"};
  s.input_schema = {"headline"};
  s.field_display = {{"headline", "新闻"}};
  s.instruction = "判断下面新闻的主题";
  s.label_name = "主题";
  return s;
}

json topic_record(std::size_t i, Rng& rng) {
  static const char* const kEvents[4][5] = {
      {"篮球联赛决赛", "马拉松比赛", "游泳锦标赛", "足球队转会", "羽毛球公开赛"},
      {"股市收盘上涨", "央行调整利率", "季度财报发布", "债券收益率下降", "基金规模创新高"},
      {"新款芯片发布", "人工智能模型开源", "卫星成功发射", "手机系统更新", "量子计算实验"},
      {"电影首映", "歌手巡回演唱会", "综艺节目开播", "电视剧收官", "音乐节开幕"}};
  static const char* const kPlaces[] = {"北京", "上海", "广州", "深圳", "杭州",
                                        "成都", "武汉", "南京", "西安", "重庆"};
  static const char* const kTails[] = {"引发关注", "吸引大量观众", "成为热门话题", "持续升温"};
  static const char* const kLabels[] = {"体育", "财经", "科技", "娱乐"};
  const auto d = digits(i, {10, 5, 4});
  const std::size_t topic = rng.below(4);
  const std::string headline = std::string(kPlaces[d[0]]) + kEvents[topic][d[1]] + kTails[d[2]] +
                               suffix(d[3], Language::kZh);
  return {{"headline", headline}, {"label", kLabels[topic]}};
}

DatasetSpec ner_spec() {
  DatasetSpec s;
  s.name = "synth_ner_zh";
  s.task = TaskKind::make(TaskFamily::kNer);
  s.language = Language::kZh;
  s.input_schema = {"sentence"};
  s.field_display = {{"sentence", "句子"}};
  s.instruction = "找出下面句子中的人名、地名和机构名";
  s.label_name = "实体";
  return s;
}

json ner_record(std::size_t i, Rng& rng) {
  static const char* const kPeople[] = {"张伟", "王芳", "李娜", "刘洋", "陈静",
                                        "杨帆", "赵磊", "黄丽", "周杰", "吴敏"};
  static const char* const kPlaces[] = {"北京", "上海", "广州", "深圳", "杭州", "成都", "武汉"};
  static const char* const kOrgs[] = {"清华大学", "中国银行", "人民医院", "华为公司",
                                      "国家图书馆", "市博物馆"};
  const auto d = digits(i, {10, 7, 6});
  const std::string per = kPeople[d[0]];
  const std::string loc = kPlaces[d[1]];
  const std::string org = kOrgs[d[2]];
  const bool with_org = rng.below(3) != 0;
  json spans = json::array();
  std::string sentence;
  auto add = [&](const std::string& type, const std::string& value) {
    const auto begin = text::code_point_count(sentence);
    sentence += value;
    spans.push_back({{"type", type},
                     {"text", value},
                     {"offsets", {begin, begin + text::code_point_count(value)}}});
  };
  add("PER", per);
  sentence += "昨天在";
  add("LOC", loc);
  if (with_org) {
    sentence += "参观了";
    add("ORG", org);
  } else {
    sentence += "见了朋友";
  }
  sentence += suffix(d[3], Language::kZh) + "。";
  return {{"sentence", sentence}, {"label", spans}};
}

}  // namespace

SyntheticDataset make_synthetic_dataset(const std::string& kind, std::size_t n,
                                        std::uint64_t seed, double duplicate_rate) {
  SyntheticDataset ds;
  json (*make)(std::size_t, Rng&) = nullptr;
  if (kind == "paraphrase_zh") {
    ds.spec = paraphrase_spec();
    make = paraphrase_record;
  } else if (kind == "sentiment_en") {
    ds.spec = sentiment_spec();
    make = sentiment_record;
  } else if (kind == "topic_zh") {
    ds.spec = topic_spec();
    make = topic_record;
  } else if (kind == "ner_zh") {
    ds.spec = ner_spec();
    make = ner_record;
  } else {
    throw Error(ErrorCode::kInvalidRecord, "unknown synthetic dataset kind '" + kind + "'");
  }
  Rng rng(derive_seed(seed, kind));
  std::size_t fresh = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ds.records.empty() && rng.uniform() < duplicate_rate) {
      ds.records.push_back(ds.records[rng.below(ds.records.size())]);
    } else {
      ds.records.push_back(make(fresh++, rng));
    }
  }
  return ds;
}

namespace {

std::vector<json> exemplar_bank(const SyntheticDataset& ds) {
  std::vector<json> out;
  for (std::size_t i = 0; i < ds.records.size() && out.size() < 8; ++i) {
    const auto& r = ds.records[i];
    json fields = json::object();
    for (const auto& f : ds.spec.input_schema) fields[f] = r.at(f);
    Label label;
    if (r.at("label").is_array()) {
      std::vector<Span> spans;
      for (const auto& s : r.at("label")) {
        spans.push_back(Span{s.at("type"), s.at("text"), std::nullopt});
      }
      label = spans;
    } else {
      label = r.at("label").get<std::string>();
    }
    const auto label_str = label_text(label);
    const auto rationale =
        ds.spec.language == Language::kZh
            ? "仔细阅读输入，关键信息表明答案是" + label_str + "。"
            : "Reading the input carefully, the key information indicates " + label_str + ".";
    out.push_back({{"fields", fields}, {"label", label_str}, {"rationale", rationale}});
  }
  return out;
}

}  // namespace

SyntheticWorkspace write_synthetic_workspace(const fs::path& dir, std::size_t total,
                                             std::uint64_t seed, std::size_t train_cap) {
  SyntheticWorkspace ws;
  fs::create_directories(dir / "specs");
  fs::create_directories(dir / "raw");
  fs::create_directories(dir / "exemplars");
  const auto& kinds = synthetic_kinds();
  json datasets = json::array();
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const std::size_t n = total / kinds.size() + (k < total % kinds.size() ? 1 : 0);
    const auto ds = make_synthetic_dataset(kinds[k], n, seed);
    const auto& name = ds.spec.name;
    write_json_file(dir / "specs" / (name + ".json"), json(ds.spec));
    write_jsonl(dir / "raw" / (name + ".jsonl"), ds.records);
    write_jsonl(dir / "exemplars" / (name + ".jsonl"), exemplar_bank(ds));
    datasets.push_back({{"spec", "specs/" + name + ".json"},
                        {"records", "raw/" + name + ".jsonl"},
                        {"exemplars", "exemplars/" + name + ".jsonl"}});
    ws.datasets.push_back(name);
    ws.records += n;
  }
  const json config = {
      {"datasets", datasets},
      {"providers",
       {{"embedding", {{"kind", "hashing"}, {"dim", 32}}},
        {"judges",
         {{{"name", "judge-a"}, {"kind", "mock"}},
          {{"name", "judge-b"}, {"kind", "mock"}},
          {{"name", "judge-c"}, {"kind", "mock"}}}},
        {"primary_judge", "judge-a"},
        {"generator", {{"name", "generator"}, {"kind", "mock"}}},
        {"inference", {{"name", "student"}, {"kind", "mock"}, {"model", "student-{method}"}}}}},
      {"seeds", {{"split", seed + 1}, {"cluster", seed + 2}, {"judge", seed + 3},
                 {"criteria", seed + 4}, {"mix", seed + 5}, {"audit", seed + 6},
                 {"review", seed + 7}, {"losses", seed + 8}}},
      {"caps", {{"train", train_cap}, {"eval_divisor", 8}}},
      {"rationale", {{"criteria_fraction", 0.2}}},
      {"emit", {{"mix_batch_size", 8}}},
      {"loss", {{"lambda_grid", {0.0, 0.25, 0.5, 0.75, 1.0}}}},
      {"review", {{"port", 0}, {"audit_size", 500}}}};
  ws.config = dir / "config.json";
  write_json_file(ws.config, config);
  return ws;
}

}  // namespace rforge
