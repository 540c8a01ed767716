#include "rforge/review.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "rforge/error.hpp"
#include "rforge/hash.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/rng.hpp"
#include "rforge/rubric.hpp"
#include "rforge/text.hpp"

namespace rforge {

std::string_view to_string(ReviewKind kind) {
  switch (kind) {
    case ReviewKind::kLabelAccuracy: return "label_accuracy";
    case ReviewKind::kRationaleRewrite: return "rationale_rewrite";
    case ReviewKind::kQualityScoring: return "quality_scoring";
    case ReviewKind::kPairwiseCompare: return "pairwise_compare";
  }
  return "label_accuracy";
}

std::string_view to_string(TaskStatus status) {
  return status == TaskStatus::kOpen ? "open" : "done";
}

ReviewKind parse_review_kind(std::string_view s) {
  for (auto k : {ReviewKind::kLabelAccuracy, ReviewKind::kRationaleRewrite,
                 ReviewKind::kQualityScoring, ReviewKind::kPairwiseCompare}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::kMalformedTask, "unknown task kind '" + std::string(s) + "'");
}

TaskStatus parse_task_status(std::string_view s) {
  if (s == "open") return TaskStatus::kOpen;
  if (s == "done") return TaskStatus::kDone;
  throw Error(ErrorCode::kMalformedTask, "unknown task status '" + std::string(s) + "'");
}

json ReviewTask::public_json() const {
  return {{"id", id}, {"kind", to_string(kind)}, {"status", to_string(status)},
          {"payload", payload}};
}

namespace {

json optional_label(const std::optional<std::string>& s) {
  return s ? json(*s) : json(nullptr);
}

}  // namespace

ReviewTask make_label_task(const Sample& sample, const DatasetSpec& spec,
                           const JudgeVerdict& verdict) {
  ReviewTask t;
  t.id = "label-" + sample.id;
  t.kind = ReviewKind::kLabelAccuracy;
  t.payload = {{"sample_id", sample.id},
               {"dataset", spec.name},
               {"input", render_input(sample, spec)},
               {"original_label", label_text(sample.label)},
               {"judge_prediction", optional_label(verdict.resolved)},
               {"label_space", spec.label_space}};
  return t;
}

ReviewTask make_rewrite_task(const Sample& sample, const DatasetSpec& spec,
                             const RationaleRecord& record) {
  ReviewTask t;
  t.id = "rewrite-" + sample.id;
  t.kind = ReviewKind::kRationaleRewrite;
  t.payload = {{"sample_id", sample.id},
               {"dataset", spec.name},
               {"input", render_input(sample, spec)},
               {"label", label_text(sample.label)},
               {"rationale", record.text}};
  return t;
}

ReviewTask make_quality_task(const Sample& sample, const DatasetSpec& spec,
                             const std::string& rationale, const std::string& source) {
  ReviewTask t;
  t.id = "quality-" + sample.id + "-" + sha256_hex(source).substr(0, 8);
  t.kind = ReviewKind::kQualityScoring;
  t.payload = {{"sample_id", sample.id},
               {"dataset", spec.name},
               {"input", render_input(sample, spec)},
               {"label", label_text(sample.label)},
               {"rationale", rationale},
               {"rubric", rubric_json()}};
  t.hidden = {{"source", source}};
  return t;
}

ReviewTask make_pairwise_task(const Sample& sample, const DatasetSpec& spec,
                              const std::string& rationale_a, const std::string& model_a,
                              const std::string& rationale_b, const std::string& model_b,
                              std::uint64_t seed) {
  const std::uint64_t placement_seed = derive_seed(seed, "pairwise/" + sample.id);
  const bool swap = Rng(placement_seed).below(2) == 1;
  ReviewTask t;
  t.id = "pairwise-" + sample.id;
  t.kind = ReviewKind::kPairwiseCompare;
  t.payload = {{"sample_id", sample.id},
               {"dataset", spec.name},
               {"input", render_input(sample, spec)},
               {"label", label_text(sample.label)},
               {"left", swap ? rationale_b : rationale_a},
               {"right", swap ? rationale_a : rationale_b},
               {"placement_seed", placement_seed}};
  t.hidden = {{"left_model", swap ? model_b : model_a}, {"right_model", swap ? model_a : model_b}};
  return t;
}

namespace {

void require_fields(const ReviewTask& task, std::initializer_list<const char*> fields) {
  for (const char* f : fields) {
    if (!task.payload.contains(f)) {
      throw Error(ErrorCode::kMalformedTask,
                  "task " + task.id + " payload lacks '" + std::string(f) + "'");
    }
  }
}

bool names_a_model(const json& j) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (text::contains(text::ascii_lower(k), "model") || names_a_model(v)) return true;
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (names_a_model(v)) return true;
    }
  }
  return false;
}

}  // namespace

void validate_task(const ReviewTask& task) {
  if (task.id.empty()) throw Error(ErrorCode::kMalformedTask, "task without an id");
  if (!task.payload.is_object() || task.payload.empty()) {
    throw Error(ErrorCode::kMalformedTask, "task " + task.id + " has no payload");
  }
  switch (task.kind) {
    case ReviewKind::kLabelAccuracy:
      require_fields(task, {"sample_id", "input", "original_label"});
      break;
    case ReviewKind::kRationaleRewrite:
      require_fields(task, {"sample_id", "rationale"});
      break;
    case ReviewKind::kQualityScoring:
      require_fields(task, {"sample_id", "rationale", "rubric"});
      break;
    case ReviewKind::kPairwiseCompare: {
      require_fields(task, {"sample_id", "left", "right"});
      if (names_a_model(task.payload)) {
        throw Error(ErrorCode::kMalformedTask, "pairwise task " + task.id + " names a model");
      }
      const auto dump = task.payload.dump();
      for (const char* key : {"left_model", "right_model"}) {
        const auto name = task.hidden.value(key, std::string());
        if (!name.empty() && text::contains(dump, name)) {
          throw Error(ErrorCode::kMalformedTask,
                      "pairwise task " + task.id + " reveals a model identity");
        }
      }
      break;
    }
  }
}

namespace {

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

[[noreturn]] void mismatch(const ReviewTask& task, const std::string& what) {
  throw Error(ErrorCode::kKindMismatch,
              std::string(to_string(task.kind)) + " task " + task.id + ": " + what);
}

}  // namespace

void validate_verdict(const ReviewTask& task, const json& verdict) {
  if (!verdict.is_object()) mismatch(task, "verdict must be an object");
  switch (task.kind) {
    case ReviewKind::kLabelAccuracy: {
      const auto v = string_field(verdict, "verdict");
      if (v != "correct" && v != "wrong" && v != "ambiguous") {
        mismatch(task, "verdict must be correct, wrong or ambiguous");
      }
      const bool has_label = verdict.contains("corrected_label") &&
                             !verdict["corrected_label"].is_null();
      if (v == "wrong") {
        if (!has_label || !verdict["corrected_label"].is_string() ||
            verdict["corrected_label"].get<std::string>().empty()) {
          mismatch(task, "wrong requires a corrected_label");
        }
        const auto space = task.payload.value("label_space", json::array());
        const auto label = verdict["corrected_label"].get<std::string>();
        if (!space.empty() && std::find(space.begin(), space.end(), label) == space.end()) {
          mismatch(task, "corrected_label '" + label + "' is not in the label space");
        }
      } else if (has_label) {
        mismatch(task, "corrected_label is only allowed with wrong");
      }
      break;
    }
    case ReviewKind::kQualityScoring: {
      if (!verdict.contains("scores") || !verdict["scores"].is_object()) {
        mismatch(task, "scores object required");
      }
      const auto& scores = verdict["scores"];
      const auto keys = per_sample_dimension_keys();
      if (scores.size() != keys.size()) mismatch(task, "exactly four dimension scores required");
      for (auto key : keys) {
        const std::string k(key);
        if (!scores.contains(k)) mismatch(task, "missing score for " + k);
        const auto& s = scores[k];
        if (!s.is_number_integer()) mismatch(task, k + " score must be an integer");
        const auto x = s.get<long long>();
        if (x < 1 || x > 5) mismatch(task, k + " score " + std::to_string(x) + " outside 1-5");
      }
      break;
    }
    case ReviewKind::kPairwiseCompare: {
      const auto p = string_field(verdict, "preference");
      if (p != "win" && p != "tie" && p != "lose") {
        mismatch(task, "preference must be win, tie or lose");
      }
      break;
    }
    case ReviewKind::kRationaleRewrite: {
      if (!verdict.contains("text") || !verdict["text"].is_string() ||
          text::trim(verdict["text"].get<std::string>()).empty()) {
        mismatch(task, "replacement text required");
      }
      break;
    }
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ReviewStore::ReviewStore(std::filesystem::path journal, std::size_t annotators_per_task,
                         Clock clock)
    : journal_(std::move(journal)),
      annotators_per_task_(std::max<std::size_t>(1, annotators_per_task)),
      clock_(std::move(clock)) {
  if (std::filesystem::exists(journal_)) {
    for (const auto& entry : read_jsonl(journal_)) apply(entry);
  }
}

void ReviewStore::apply(const json& entry) {
  const auto op = entry.at("op").get<std::string>();
  if (op == "enqueue") {
    const auto& t = entry.at("task");
    ReviewTask task;
    task.id = t.at("id").get<std::string>();
    task.kind = parse_review_kind(t.at("kind").get<std::string>());
    task.payload = t.at("payload");
    task.hidden = t.value("hidden", json::object());
    if (index_.count(task.id)) return;
    index_[task.id] = tasks_.size();
    tasks_.push_back(std::move(task));
  } else if (op == "verdict") {
    auto it = index_.find(entry.at("task_id").get<std::string>());
    if (it == index_.end()) return;
    auto& task = tasks_[it->second];
    task.verdicts.push_back(RecordedVerdict{entry.at("verdict"), entry.value("annotator", ""),
                                            entry.value("timestamp", "")});
    if (task.verdicts.size() >= annotators_per_task_) task.status = TaskStatus::kDone;
  }
}

void ReviewStore::append(const json& entry) {
  if (!journal_.parent_path().empty()) std::filesystem::create_directories(journal_.parent_path());
  append_jsonl(journal_, entry);
}

EnqueueResult ReviewStore::enqueue(std::span<const ReviewTask> tasks) {
  for (const auto& t : tasks) validate_task(t);
  std::lock_guard lock(mu_);
  EnqueueResult result;
  for (const auto& t : tasks) {
    if (index_.count(t.id)) {
      ++result.duplicates;
      continue;
    }
    const json entry = {{"op", "enqueue"},
                        {"task",
                         {{"id", t.id},
                          {"kind", to_string(t.kind)},
                          {"payload", t.payload},
                          {"hidden", t.hidden}}}};
    append(entry);
    apply(entry);
    ++result.accepted;
  }
  return result;
}

ReviewTask ReviewStore::submit_verdict(const std::string& task_id, const json& verdict,
                                       const std::string& annotator) {
  std::lock_guard lock(mu_);
  auto it = index_.find(task_id);
  if (it == index_.end()) throw Error(ErrorCode::kTaskNotFound, "no task " + task_id);
  const auto& task = tasks_[it->second];
  if (task.status == TaskStatus::kDone) {
    throw Error(ErrorCode::kTaskClosed, "task " + task_id + " is closed");
  }
  for (const auto& v : task.verdicts) {
    if (v.annotator == annotator) {
      throw Error(ErrorCode::kTaskClosed,
                  "task " + task_id + " already has a verdict from " + annotator);
    }
  }
  validate_verdict(task, verdict);
  const json entry = {{"op", "verdict"},
                      {"task_id", task_id},
                      {"verdict", verdict},
                      {"annotator", annotator},
                      {"timestamp", clock_ ? clock_() : utc_timestamp()}};
  append(entry);
  apply(entry);
  return tasks_[it->second];
}

std::optional<ReviewTask> ReviewStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return tasks_[it->second];
}

std::vector<ReviewTask> ReviewStore::list(std::optional<ReviewKind> kind,
                                          std::optional<TaskStatus> status) const {
  std::lock_guard lock(mu_);
  std::vector<ReviewTask> out;
  for (const auto& t : tasks_) {
    if (kind && t.kind != *kind) continue;
    if (status && t.status != *status) continue;
    out.push_back(t);
  }
  return out;
}

std::size_t ReviewStore::size() const {
  std::lock_guard lock(mu_);
  return tasks_.size();
}

namespace {

const char* export_file(ReviewKind kind) {
  switch (kind) {
    case ReviewKind::kLabelAccuracy: return "review_outcomes.jsonl";
    case ReviewKind::kRationaleRewrite: return "rationale_rewrites.jsonl";
    case ReviewKind::kQualityScoring: return "quality_scores.jsonl";
    case ReviewKind::kPairwiseCompare: return "pairwise_outcomes.jsonl";
  }
  return "review_outcomes.jsonl";
}

json export_row(const ReviewTask& task, const RecordedVerdict& v) {
  const auto sample_id = task.payload.value("sample_id", std::string());
  switch (task.kind) {
    case ReviewKind::kLabelAccuracy: {
      ReviewOutcome o;
      o.sample_id = sample_id;
      o.verdict = parse_review_verdict(v.verdict.at("verdict").get<std::string>());
      if (o.verdict == ReviewVerdict::kWrong) {
        o.corrected_label = v.verdict.at("corrected_label").get<std::string>();
      }
      o.annotator = v.annotator;
      o.timestamp = v.timestamp;
      return outcome_to_json(o);
    }
    case ReviewKind::kRationaleRewrite:
      return {{"sample_id", sample_id},
              {"text", v.verdict.at("text")},
              {"annotator", v.annotator},
              {"timestamp", v.timestamp}};
    case ReviewKind::kQualityScoring:
      return {{"task_id", task.id},
              {"sample_id", sample_id},
              {"source", task.hidden.value("source", std::string())},
              {"scores", v.verdict.at("scores")},
              {"annotator", v.annotator},
              {"timestamp", v.timestamp}};
    case ReviewKind::kPairwiseCompare: {
      const auto pref = v.verdict.at("preference").get<std::string>();
      std::string winner = "tie";
      if (pref == "win") winner = task.hidden.value("left_model", std::string("left"));
      if (pref == "lose") winner = task.hidden.value("right_model", std::string("right"));
      return {{"task_id", task.id},
              {"sample_id", sample_id},
              {"preference", pref},
              {"left_model", task.hidden.value("left_model", std::string())},
              {"right_model", task.hidden.value("right_model", std::string())},
              {"winner", winner},
              {"annotator", v.annotator},
              {"timestamp", v.timestamp}};
    }
  }
  return json::object();
}

}  // namespace

ExportResult ReviewStore::export_verdicts(const std::filesystem::path& dir,
                                          std::optional<ReviewKind> kind) const {
  std::lock_guard lock(mu_);
  std::filesystem::create_directories(dir);
  std::vector<ReviewKind> kinds;
  if (kind) {
    kinds.push_back(*kind);
  } else {
    kinds = {ReviewKind::kLabelAccuracy, ReviewKind::kRationaleRewrite,
             ReviewKind::kQualityScoring, ReviewKind::kPairwiseCompare};
  }
  ExportResult result;
  json files = json::array();
  for (auto k : kinds) {
    std::vector<json> rows;
    for (const auto& t : tasks_) {
      if (t.kind != k) continue;
      for (const auto& v : t.verdicts) rows.push_back(export_row(t, v));
    }
    const auto path = dir / export_file(k);
    write_jsonl(path, rows);
    result.files.push_back(path);
    result.counts[export_file(k)] = rows.size();
    files.push_back({{"file", export_file(k)}, {"kind", to_string(k)}, {"lines", rows.size()}});
  }
  const auto manifest = dir / "export_manifest.json";
  write_json_file(manifest, {{"files", files}, {"annotators_per_task", annotators_per_task_}});
  result.files.push_back(manifest);
  return result;
}

std::map<std::string, std::string> read_rewrites(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  for (const auto& row : read_jsonl(path)) {
    out[row.at("sample_id").get<std::string>()] = row.at("text").get<std::string>();
  }
  return out;
}

}  // namespace rforge
