#pragma once

#include <array>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace rforge {

using json = nlohmann::json;

struct RubricDimension {
  std::string_view key;
  std::string_view name_en;
  std::string_view name_zh;
  std::string_view definition;
  // Scored per rationale. Diversity is judged across a dataset instead.
  bool per_sample;
  // anchors[0] is score 1, anchors[4] is score 5.
  std::array<std::string_view, 5> anchors_en;
  std::array<std::string_view, 5> anchors_zh;
};

const std::array<RubricDimension, 5>& rubric_dimensions();

// Keys of the four dimensions an annotator scores on each rationale.
std::array<std::string_view, 4> per_sample_dimension_keys();

// {"scale": {"min": 1, "max": 5}, "dimensions": [...]} with anchors keyed "1".."5".
json rubric_json();

}  // namespace rforge
