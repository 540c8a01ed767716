#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rforge/corpus.hpp"

namespace rforge {

// The fixed sentence a rationale ends with, immediately followed by the
// answer. Shared by prompt construction, emission and answer parsing.
std::string_view answer_prefix(Language language);

// The closing sentence for `label`: "Therefore, the answer is: Matched" or
// "因此得出，答案：匹配".
std::string answer_sentence(Language language, std::string_view label);

// Answer-sentence spellings recognised when parsing model output. The
// canonical prefixes come first; the rest are variants observed in
// generated text ("Thus, the answer is:", "因此，得出答案：", ...).
const std::vector<std::string>& default_answer_prefixes();

// Per-dataset answer parser configuration.
struct AnswerParser {
  std::vector<std::string> label_space;  // empty => span answers
  std::vector<std::string> prefixes = default_answer_prefixes();

  static AnswerParser for_dataset(const DatasetSpec& spec);
};

// Maps free text onto the label space: exact match (after trimming and
// stripping trailing punctuation), then a label at the start of the text
// followed by a non-alphanumeric boundary ("C. Shanghai" -> "C"), then the
// longest label contained in the text. Ambiguous containment yields nullopt.
std::optional<std::string> match_label(std::string_view text,
                                       const std::vector<std::string>& label_space);

// Text after the last answer-sentence prefix, or nullopt if none occurs.
std::optional<std::string> answer_tail(std::string_view text,
                                       const std::vector<std::string>& prefixes);

// Text before the last answer-sentence prefix, right-trimmed. Returns the
// whole text (trimmed) when no prefix occurs.
std::string rationale_body(std::string_view text, const std::vector<std::string>& prefixes);

// Final answer of a rationale: the tail after the last prefix matched against
// the label space. For span tasks the tail is returned as canonical span text.
std::optional<std::string> extract_final_answer(std::string_view rationale_text,
                                                const AnswerParser& parser);

// Removes trailing sentence punctuation and white space ("。", ".", "!" ...).
std::string strip_trailing_punct(std::string_view s);

}  // namespace rforge
