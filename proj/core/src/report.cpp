#include "rforge/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"

namespace rforge {

namespace fs = std::filesystem;

bool mode_applies(Method method, InferenceMode mode) {
  switch (mode) {
    case InferenceMode::kDirect: return method != Method::kReason;
    case InferenceMode::kCot: return method != Method::kLabelOnly && method != Method::kExplain;
    case InferenceMode::kRationalize:
      return method != Method::kLabelOnly && method != Method::kReason;
  }
  return false;
}

namespace {

json funnel_json(const FilterFunnel& f) { return f.to_json(); }

FilterFunnel funnel_from_json(const json& j) {
  FilterFunnel f;
  f.generated = j.value("generated", std::size_t{0});
  f.accepted = j.value("accepted", std::size_t{0});
  f.rejected_safety = j.value("rejected_safety", std::size_t{0});
  f.rejected_length = j.value("rejected_length", std::size_t{0});
  f.rejected_inconsistent = j.value("rejected_inconsistent", std::size_t{0});
  f.rewrite_queue = j.value("rewrite_queue", std::size_t{0});
  return f;
}

std::string method_title(const std::string& m) {
  if (m == "label_only") return "Label-Only";
  if (m == "reason") return "Reason";
  if (m == "explain") return "Explain";
  if (m == "mix") return "Mix";
  if (m == "align") return "Align";
  return m;
}

std::string mode_title(const std::string& m) {
  if (m == "direct") return "Direct";
  if (m == "cot") return "CoT";
  if (m == "rationalize") return "Rationalize";
  return m;
}

std::string percent(const json& v) {
  if (v.is_null()) return "omitted";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v.get<double>());
  return buf;
}

}  // namespace

json build_report(const json& eval_report, const std::map<std::string, FilterFunnel>& funnels) {
  std::map<std::tuple<std::string, std::string, std::string>, double> macro;
  std::set<std::string> task_names;
  std::set<std::string> methods_seen;
  std::set<std::string> modes_seen;
  for (const auto& m : eval_report.value("macro", json::array())) {
    const auto task = m.at("task").get<std::string>();
    const auto method = m.at("method").get<std::string>();
    const auto mode = m.at("mode").get<std::string>();
    macro[{task, method, mode}] = m.at("score").get<double>();
    task_names.insert(task);
    methods_seen.insert(method);
    modes_seen.insert(mode);
  }
  std::vector<std::string> tasks(task_names.begin(), task_names.end());
  std::sort(tasks.begin(), tasks.end(), [](const auto& a, const auto& b) {
    return parse_task_family(a) < parse_task_family(b);
  });

  json blocks = json::array();
  for (auto mode : {InferenceMode::kDirect, InferenceMode::kCot, InferenceMode::kRationalize}) {
    const std::string mode_name(to_string(mode));
    if (!modes_seen.count(mode_name)) continue;
    json rows = json::array();
    for (auto method : all_methods()) {
      const std::string method_name(to_string(method));
      if (!methods_seen.count(method_name)) continue;
      json cells = json::object();
      double sum = 0.0;
      std::size_t present = 0;
      for (const auto& task : tasks) {
        auto it = macro.find({task, method_name, mode_name});
        if (!mode_applies(method, mode) || it == macro.end()) {
          cells[task] = nullptr;
        } else {
          cells[task] = it->second;
          sum += it->second;
          ++present;
        }
      }
      rows.push_back({{"method", method_name},
                      {"cells", cells},
                      {"avg", present ? json(sum / static_cast<double>(present)) : json(nullptr)}});
    }
    blocks.push_back({{"mode", mode_name}, {"rows", rows}});
  }

  json funnel = json::object();
  FilterFunnel total;
  for (const auto& [name, f] : funnels) {
    funnel[name] = funnel_json(f);
    total.generated += f.generated;
    total.accepted += f.accepted;
    total.rejected_safety += f.rejected_safety;
    total.rejected_length += f.rejected_length;
    total.rejected_inconsistent += f.rejected_inconsistent;
    total.rewrite_queue += f.rewrite_queue;
  }
  funnel["total"] = funnel_json(total);
  return {{"tasks", tasks}, {"blocks", blocks}, {"funnel", funnel}};
}

std::string render_report_markdown(const json& report) {
  std::string out = "# Evaluation report\n\n## Scores\n";
  const auto tasks = report.at("tasks").get<std::vector<std::string>>();
  for (const auto& block : report.at("blocks")) {
    out += "\n### " + mode_title(block.at("mode").get<std::string>()) + "\n\n| Method |";
    for (const auto& t : tasks) out += " " + t + " |";
    out += " Avg |\n|---|";
    for (std::size_t i = 0; i <= tasks.size(); ++i) out += "---:|";
    out += "\n";
    for (const auto& row : block.at("rows")) {
      out += "| " + method_title(row.at("method").get<std::string>()) + " |";
      for (const auto& t : tasks) out += " " + percent(row.at("cells").at(t)) + " |";
      out += " " + percent(row.at("avg")) + " |\n";
    }
  }
  out += "\n## Rationale filter funnel\n\n"
         "| Dataset | Generated | Accepted | Rejected (safety) | Rejected (length) | "
         "Rejected (inconsistent) | Rewrite queue |\n|---|---:|---:|---:|---:|---:|---:|\n";
  const auto& funnel = report.at("funnel");
  auto line = [&](const std::string& name, const json& f) {
    out += "| " + name + " | " + std::to_string(f.value("generated", 0)) + " | " +
           std::to_string(f.value("accepted", 0)) + " | " +
           std::to_string(f.value("rejected_safety", 0)) + " | " +
           std::to_string(f.value("rejected_length", 0)) + " | " +
           std::to_string(f.value("rejected_inconsistent", 0)) + " | " +
           std::to_string(f.value("rewrite_queue", 0)) + " |\n";
  };
  for (const auto& [name, f] : funnel.items()) {
    if (name != "total") line(name, f);
  }
  if (funnel.contains("total")) line("total", funnel.at("total"));
  return out;
}

json report_for_workdir(const fs::path& workdir) {
  const auto eval_path = workdir / "eval" / "eval_report.json";
  if (!fs::exists(eval_path)) {
    throw Error(ErrorCode::kNoEvalOutputs, "no eval outputs at " + eval_path.string());
  }
  const auto eval_report = read_json_file(eval_path);
  if (eval_report.value("per_dataset", json::array()).empty()) {
    throw Error(ErrorCode::kNoEvalOutputs, eval_path.string() + " holds no scores");
  }
  std::map<std::string, FilterFunnel> funnels;
  const auto filter_dir = workdir / "rationale-filter";
  if (fs::is_directory(filter_dir)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(filter_dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "funnel.json")) {
        dirs.push_back(entry.path());
      }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      funnels[d.filename().string()] = funnel_from_json(read_json_file(d / "funnel.json"));
    }
  }
  auto report = build_report(eval_report, funnels);
  report["eval"] = eval_report;
  return report;
}

}  // namespace rforge
