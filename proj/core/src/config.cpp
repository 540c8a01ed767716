#include "rforge/config.hpp"

#include <cstdlib>
#include <set>

#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/judge.hpp"
#include "rforge/rng.hpp"

namespace rforge {

void SeedConfig::override_with(std::uint64_t base) {
  split = derive_seed(base, "split");
  cluster = derive_seed(base, "cluster");
  judge = derive_seed(base, "judge");
  criteria = derive_seed(base, "criteria");
  mix = derive_seed(base, "mix");
  audit = derive_seed(base, "audit");
  review = derive_seed(base, "review");
  losses = derive_seed(base, "losses");
}

json SeedConfig::to_json() const {
  return {{"split", split},   {"cluster", cluster}, {"judge", judge},   {"criteria", criteria},
          {"mix", mix},       {"audit", audit},     {"review", review}, {"losses", losses}};
}

std::filesystem::path PipelineConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, path + ": " + what);
}

json interpolate(const json& node, const std::string& path) {
  if (node.is_string()) {
    const auto& s = node.get_ref<const std::string&>();
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
      if (s.compare(i, 2, "${") == 0) {
        const auto close = s.find('}', i + 2);
        if (close == std::string::npos) invalid(path, "unterminated ${ in string");
        const auto name = s.substr(i + 2, close - i - 2);
        const char* value = std::getenv(name.c_str());
        if (value == nullptr) invalid(path, "environment variable " + name + " is not set");
        out += value;
        i = close + 1;
      } else {
        out += s[i++];
      }
    }
    return out;
  }
  if (node.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : node.items()) out[k] = interpolate(v, path.empty() ? k : path + "." + k);
    return out;
  }
  if (node.is_array()) {
    json out = json::array();
    for (std::size_t i = 0; i < node.size(); ++i) {
      out.push_back(interpolate(node[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
  return node;
}

// Typed field access that reports the dotted path of whatever is wrong.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) const { return node_.contains(key) && !node_[key].is_null(); }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  Reader child(const char* key) const {
    static const json kEmpty = json::object();
    return has(key) ? Reader(node_[key], field(key)) : Reader(kEmpty, field(key));
  }

  const json& raw(const char* key) const { return node_[key]; }

  std::string str(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!node_[key].is_string()) invalid(field(key), "expected a string");
    return node_[key].get<std::string>();
  }

  std::string required_str(const char* key) const {
    if (!has(key)) invalid(field(key), "required");
    return str(key, "");
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    if (!node_[key].is_number()) invalid(field(key), "expected a number");
    return node_[key].get<double>();
  }

  std::uint64_t count(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    if (!node_[key].is_number_integer() || node_[key].get<long long>() < 0) {
      invalid(field(key), "expected a non-negative integer");
    }
    return node_[key].get<std::uint64_t>();
  }

  std::vector<std::string> strings(const char* key, std::vector<std::string> fallback) const {
    if (!has(key)) return fallback;
    const auto& arr = node_[key];
    if (!arr.is_array()) invalid(field(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) {
        invalid(field(key) + "[" + std::to_string(i) + "]", "expected a string");
      }
      out.push_back(arr[i].get<std::string>());
    }
    return out;
  }

 private:
  const json& node_;
  std::string path_;
};

HttpEndpoint parse_endpoint(const Reader& r) {
  HttpEndpoint e;
  e.url = r.str("url", "");
  e.api_key_env = r.str("api_key_env", "");
  e.timeout_seconds = static_cast<int>(r.count("timeout_seconds", 60));
  return e;
}

ProviderConfig parse_provider(const Reader& r) {
  ProviderConfig p;
  p.name = r.str("name", "");
  p.kind = r.str("kind", "http");
  if (p.kind != "http" && p.kind != "mock") invalid(r.field("kind"), "must be http or mock");
  p.model = r.str("model", p.name);
  if (p.name.empty()) p.name = p.model;
  p.endpoint = parse_endpoint(r);
  if (p.kind == "http" && p.endpoint.url.empty()) invalid(r.field("url"), "required for http");
  return p;
}

template <typename T, typename Parse>
T parse_enum(const Reader& r, const char* key, T fallback, Parse parse) {
  if (!r.has(key)) return fallback;
  try {
    return parse(r.str(key, ""));
  } catch (const Error& e) {
    invalid(r.field(key), e.what());
  }
}

}  // namespace

json interpolate_env(const json& doc) { return interpolate(doc, ""); }

PipelineConfig parse_config(const json& raw, const std::filesystem::path& base_dir) {
  const json doc = interpolate_env(raw);
  Reader root(doc, "");
  PipelineConfig c;
  c.base_dir = base_dir;
  c.document = doc;

  if (!root.has("datasets") || !root.raw("datasets").is_array() || root.raw("datasets").empty()) {
    invalid("datasets", "a non-empty array is required");
  }
  const auto& ds = root.raw("datasets");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Reader r(ds[i], "datasets[" + std::to_string(i) + "]");
    DatasetSource src;
    src.spec = r.required_str("spec");
    src.records = r.required_str("records");
    src.exemplars = r.str("exemplars", "");
    c.datasets.push_back(std::move(src));
  }

  const auto providers = root.child("providers");
  {
    const auto e = providers.child("embedding");
    c.embedding.kind = e.str("kind", "hashing");
    if (c.embedding.kind != "http" && c.embedding.kind != "hashing") {
      invalid(e.field("kind"), "must be http or hashing");
    }
    c.embedding.dim = e.count("dim", 64);
    c.embedding.model = e.str("model", "hashing-" + std::to_string(c.embedding.dim));
    c.embedding.endpoint = parse_endpoint(e);
    c.embedding.batch_size = e.count("batch_size", 32);
    if (c.embedding.kind == "http" && c.embedding.endpoint.url.empty()) {
      invalid(e.field("url"), "required for http");
    }
  }
  if (providers.has("judges")) {
    const auto& arr = providers.raw("judges");
    if (!arr.is_array()) invalid("providers.judges", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.judges.push_back(parse_provider(Reader(arr[i], "providers.judges[" + std::to_string(i) + "]")));
    }
  }
  c.primary_judge = providers.str("primary_judge", "");
  c.generator = parse_provider(providers.child("generator"));
  if (providers.has("inference")) c.inference = parse_provider(providers.child("inference"));
  {
    const auto r = providers.child("retry");
    c.retry.attempts = static_cast<int>(r.count("attempts", 3));
    c.retry.base_delay = std::chrono::milliseconds(r.count("base_delay_ms", 200));
  }

  {
    const auto s = root.child("seeds");
    c.seeds.split = s.count("split", c.seeds.split);
    c.seeds.cluster = s.count("cluster", c.seeds.cluster);
    c.seeds.judge = s.count("judge", c.seeds.judge);
    c.seeds.criteria = s.count("criteria", c.seeds.criteria);
    c.seeds.mix = s.count("mix", c.seeds.mix);
    c.seeds.audit = s.count("audit", c.seeds.audit);
    c.seeds.review = s.count("review", c.seeds.review);
    c.seeds.losses = s.count("losses", c.seeds.losses);
  }
  {
    const auto caps = root.child("caps");
    c.train_cap = caps.count("train", c.train_cap);
    c.eval_divisor = caps.count("eval_divisor", c.eval_divisor);
  }
  {
    const auto order = root.str("cleaning_order", "cluster_first");
    if (order == "cluster_first") {
      c.cleaning_order = CleaningOrder::kClusterFirst;
    } else if (order == "judge_first") {
      c.cleaning_order = CleaningOrder::kJudgeFirst;
    } else {
      invalid("cleaning_order", "must be cluster_first or judge_first");
    }
  }

  {
    const auto r = root.child("rationale");
    c.criteria_fraction = r.number("criteria_fraction", c.criteria_fraction);
    c.base_design = parse_enum(r, "base_design", c.base_design, parse_design_kind);
    c.tokenizer_vocab = r.str("tokenizer_vocab", "");
    const auto f = r.child("filter");
    c.filter.leak_keywords = f.strings("leak_keywords", c.filter.leak_keywords);
    c.filter.refusal_phrases = f.strings("refusal_phrases", c.filter.refusal_phrases);
    c.filter.max_tokens = f.count("max_tokens", c.filter.max_tokens);
  }
  {
    const auto e = root.child("emit");
    if (e.has("methods")) {
      c.methods.clear();
      const auto names = e.strings("methods", {});
      for (std::size_t i = 0; i < names.size(); ++i) {
        try {
          c.methods.push_back(parse_method(names[i]));
        } catch (const Error& err) {
          invalid("emit.methods[" + std::to_string(i) + "]", err.what());
        }
      }
    }
    c.mix_batch_size = e.count("mix_batch_size", c.mix_batch_size);
    c.align_pairs_per_batch = e.count("align_pairs_per_batch", c.align_pairs_per_batch);
  }
  {
    const auto l = root.child("loss");
    if (l.has("lambda_grid")) {
      const auto& arr = l.raw("lambda_grid");
      if (!arr.is_array()) invalid("loss.lambda_grid", "expected an array of numbers");
      c.lambda_grid.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) {
          invalid("loss.lambda_grid[" + std::to_string(i) + "]", "expected a number");
        }
        c.lambda_grid.push_back(arr[i].get<double>());
      }
    }
    c.loss_input = l.str("input", "");
  }
  {
    const auto e = root.child("eval");
    if (e.has("modes")) {
      c.eval_modes.clear();
      const auto names = e.strings("modes", {});
      for (std::size_t i = 0; i < names.size(); ++i) {
        try {
          c.eval_modes.push_back(parse_inference_mode(names[i]));
        } catch (const Error& err) {
          invalid("eval.modes[" + std::to_string(i) + "]", err.what());
        }
      }
    }
    c.predictions_dir = e.str("predictions_dir", "");
  }
  {
    const auto k = root.child("concurrency");
    c.concurrency.embedding = k.count("embedding", c.concurrency.embedding);
    c.concurrency.judge = k.count("judge", c.concurrency.judge);
    c.concurrency.generator = k.count("generator", c.concurrency.generator);
    c.concurrency.inference = k.count("inference", c.concurrency.inference);
  }
  {
    const auto r = root.child("review");
    c.review.host = r.str("host", c.review.host);
    c.review.port = static_cast<int>(r.count("port", static_cast<std::uint64_t>(c.review.port)));
    c.review.token = r.str("token", "");
    c.review.static_dir = r.str("static_dir", "");
    c.review.annotators_per_task = r.count("annotators_per_task", 1);
    c.review.audit_size = r.count("audit_size", c.review.audit_size);
    c.review.recollection_fraction = r.number("recollection_fraction", c.review.recollection_fraction);
    c.review.recollection_base = r.str("recollection_base", c.review.recollection_base);
    c.review.outcomes = r.str("outcomes", "");
    c.review.rewrites = r.str("rewrites", "");
  }

  validate_config(c);
  return c;
}

void validate_config(const PipelineConfig& c) {
  if (c.judges.size() != kJudgeCount) {
    invalid("providers.judges", "exactly 3 judges required, got " + std::to_string(c.judges.size()));
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.judges.size(); ++i) {
    if (!names.insert(c.judges[i].name).second) {
      invalid("providers.judges[" + std::to_string(i) + "].name",
              "duplicate judge name '" + c.judges[i].name + "'");
    }
  }
  if (!names.count(c.primary_judge)) {
    invalid("providers.primary_judge", "'" + c.primary_judge + "' is not one of the judges");
  }
  if (!(c.criteria_fraction >= 0.0 && c.criteria_fraction <= 1.0)) {
    invalid("rationale.criteria_fraction", "must lie in [0, 1]");
  }
  if (c.lambda_grid.empty()) invalid("loss.lambda_grid", "must not be empty");
  for (std::size_t i = 0; i < c.lambda_grid.size(); ++i) {
    const double l = c.lambda_grid[i];
    if (!(l >= 0.0 && l <= 1.0)) {
      invalid("loss.lambda_grid[" + std::to_string(i) + "]", "must lie in [0, 1]");
    }
  }
  if (c.train_cap == 0) invalid("caps.train", "must be positive");
  if (c.eval_divisor == 0) invalid("caps.eval_divisor", "must be positive");
  if (c.mix_batch_size == 0) invalid("emit.mix_batch_size", "must be positive");
  if (c.align_pairs_per_batch == 0) invalid("emit.align_pairs_per_batch", "must be positive");
  if (!(c.review.recollection_fraction >= 0.0 && c.review.recollection_fraction <= 1.0)) {
    invalid("review.recollection_fraction", "must lie in [0, 1]");
  }
  if (c.review.recollection_base != "unaudited" && c.review.recollection_base != "queue") {
    invalid("review.recollection_base", "must be unaudited or queue");
  }
  if (c.review.annotators_per_task == 0) invalid("review.annotators_per_task", "must be positive");
  if (c.methods.empty()) invalid("emit.methods", "must not be empty");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = read_json_file(path);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  return parse_config(doc, path.parent_path());
}

}  // namespace rforge
