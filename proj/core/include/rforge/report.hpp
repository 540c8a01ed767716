#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "rforge/emit.hpp"
#include "rforge/evalsuite.hpp"
#include "rforge/rationale.hpp"

namespace rforge {

using json = nlohmann::json;

// Whether a model trained with `method` is evaluated under `mode`. Label-only
// and explain models answer with the label first, so they have no cot cell;
// reason models may not answer directly, so they have no direct cell.
bool mode_applies(Method method, InferenceMode mode);

// Score tables in the seen-task layout: one block per inference mode, one
// row per training method, one column per task (macro-averaged over its
// datasets) plus Avg. Inapplicable or missing cells are null ("omitted").
//
// {"tasks": [...], "blocks": [{"mode", "rows": [{"method", "cells": {task: score|null},
//   "avg": score|null}]}], "funnel": {dataset: funnel, "total": funnel}}
json build_report(const json& eval_report, const std::map<std::string, FilterFunnel>& funnels);

std::string render_report_markdown(const json& report);

// Reads <workdir>/eval/eval_report.json and the per-dataset filter funnels.
// Throws kNoEvalOutputs when there are no eval outputs.
json report_for_workdir(const std::filesystem::path& workdir);

}  // namespace rforge
