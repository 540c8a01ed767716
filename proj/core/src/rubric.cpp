#include "rforge/rubric.hpp"

namespace rforge {

const std::array<RubricDimension, 5>& rubric_dimensions() {
  static const std::array<RubricDimension, 5> kDimensions = {{
      {"conciseness",
       "Conciseness",
       "简洁性",
       "Rationales avoid unnecessary length or repetition, delivering key points succinctly "
       "without losing clarity or comprehension.",
       true,
       {"Rationales are excessively lengthy or repetitive, obscuring the key points entirely.",
        "Rationales are verbose, with significant redundancy or irrelevant details that detract "
        "from clarity.",
        "Rationales are moderately concise; include some unnecessary sentences or repetition "
        "that could be trimmed.",
        "Rationales are mostly concise but contain minor redundancy or slightly excessive "
        "detail.",
        "Rationales are highly concise, with no unnecessary details or repetition; every word "
        "adds value."},
       {"解释过于冗长或重复，完全掩盖了要点。",
        "解释冗长，有显著的冗余或无关的细节，影响清晰度。",
        "解释中等简洁；包含一些不必要的句子或重复，应该去除。",
        "解释大致简洁，但有些许冗余或细节略显过多。",
        "解释非常简洁，没有不必要的细节或重复；每个词都增加了价值。"}},
      {"comprehensiveness",
       "Comprehensiveness",
       "全面性",
       "Rationales thoroughly address all essential aspects, covering key points and providing "
       "necessary context without omissions.",
       true,
       {"Rationales fail to address the core question; critical omissions make the rationale "
        "ineffective.",
        "Rationales are incomplete, omitting multiple critical points or background information "
        "necessary for clarity.",
        "Rationales cover some key aspects but miss important elements or lack context in key "
        "areas.",
        "Rationales cover most key aspects but have minor omissions or areas lacking sufficient "
        "detail.",
        "Rationales fully cover all essential aspects and relevant background information; "
        "nothing critical is omitted."},
       {"解释未能回答核心问题；缺失的关键内容使解释无效。",
        "解释不完整，遗漏了多个关键点或必要的背景信息，影响清晰度。",
        "解释涵盖了一些关键方面，但缺少重要元素或关键部分缺乏背景信息。",
        "解释涵盖了大部分关键方面，但有些细节略显不足或有小幅遗漏。",
        "解释全面覆盖所有重要方面和相关背景信息；没有遗漏关键内容。"}},
      {"logical_coherence",
       "Logical Coherence",
       "连贯性",
       "Rationales follow a clear and human-like logical reasoning process, progressing "
       "step-by-step without contradictions or logical gaps.",
       true,
       {"Rationales lack logical coherence entirely, with random or disconnected reasoning.",
        "Rationales are poorly structured, with frequent logical gaps, contradictions, or "
        "unclear progression.",
        "Rationales have noticeable gaps or inconsistencies in the reasoning process but "
        "maintain overall direction.",
        "Rationales are mostly logical, with minor lapses in coherence or occasional steps that "
        "feel abrupt or disconnected.",
        "Rationales follow a fully coherent, step-by-step logical structure, with no "
        "contradictions or leaps in reasoning."},
       {"解释完全缺乏逻辑连贯性，推理杂乱无章或脱节。",
        "解释结构较差，频繁出现逻辑间隙、矛盾或进展不清晰。",
        "解释在推理过程中有明显的间隙或不一致，但整体方向仍然明确。",
        "解释大致逻辑清晰，但偶尔有小的连贯性问题或步骤感觉突然或脱节。",
        "解释遵循一个完全连贯、一步步展开的逻辑结构，没有矛盾或推理跳跃。"}},
      {"faithfulness",
       "Faithfulness",
       "忠实性",
       "Rationales accurately reflect the input text and final label, justifying the label "
       "based only on the provided evidence.",
       true,
       {"Rationales are unfaithful to the input or label, with justification that is incorrect "
        "or fabricated.",
        "Rationales stray significantly from the input or label, with frequent inaccuracies or "
        "irrelevant reasoning.",
        "Rationales have moderate faithfulness; partially align with the input and label but "
        "include notable inaccuracies.",
        "Rationales are mostly faithful but include minor inaccuracies or irrelevant points "
        "that don't detract significantly.",
        "Rationales are entirely faithful to the input and label, fully grounded in the "
        "evidence without deviation."},
       {"解释与输入或标签不符，理由不正确或编造。",
        "解释与输入或标签偏离较大，存在频繁的不准确或无关的推理。",
        "解释有中等程度的忠实性；与输入和标签部分一致，但有明显的不准确之处。",
        "解释大致忠实，但包括一些轻微的不准确或无关点，且没有显著影响。",
        "解释完全忠实于输入和标签，完全基于证据，没有偏离。"}},
      {"diversity",
       "Diversity",
       "多样性",
       "Rationales are rich in linguistic expressions, reasoning forms and explanation "
       "perspectives, avoiding repetitive patterns or reliance on a uniform approach.",
       false,
       {"Rationales are entirely repetitive, offering no variation in reasoning, style, or "
        "phrasing.",
        "Rationales lack diversity, with repeated reasoning styles or identical phrasing "
        "dominating the responses.",
        "Rationales show moderate diversity; some variety is present, but significant "
        "repetition is noticeable.",
        "Rationales are mostly diverse but include some recurring patterns or similar phrasing "
        "across examples.",
        "Rationales are highly diverse, showcasing varied reasoning styles, phrasing, or "
        "perspectives."},
       {"解释完全重复，推理、风格或措辞没有任何变化。",
        "解释缺乏多样性，推理风格或措辞重复，主导了回答。",
        "解释表现出中等多样性；存在一定的变化，但显著的重复性也比较明显。",
        "解释大多样，但在不同示例中有一些重复模式或相似措辞。",
        "解释非常多样，展现了不同的推理风格、措辞或视角。"}},
  }};
  return kDimensions;
}

std::array<std::string_view, 4> per_sample_dimension_keys() {
  return {"conciseness", "comprehensiveness", "logical_coherence", "faithfulness"};
}

json rubric_json() {
  json dims = json::array();
  for (const auto& d : rubric_dimensions()) {
    json en = json::object();
    json zh = json::object();
    for (std::size_t i = 0; i < 5; ++i) {
      en[std::to_string(i + 1)] = d.anchors_en[i];
      zh[std::to_string(i + 1)] = d.anchors_zh[i];
    }
    dims.push_back({{"key", d.key},
                    {"name_en", d.name_en},
                    {"name_zh", d.name_zh},
                    {"definition", d.definition},
                    {"per_sample", d.per_sample},
                    {"anchors_en", en},
                    {"anchors_zh", zh}});
  }
  return {{"scale", {{"min", 1}, {"max", 5}}}, {"dimensions", dims}};
}

}  // namespace rforge
