#include "rforge/answer.hpp"

#include <algorithm>

#include "rforge/text.hpp"

namespace rforge {

namespace {

constexpr std::u32string_view kTrailingPunct =
    U".。!！?？,，;；:：、\"'”’)）」』*~…";
constexpr std::u32string_view kLeadingPunct = U"\"'“‘(（「『*:：";

bool is_ascii_alnum(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9');
}

// Case-insensitive (ASCII) search for `needle` in `hay` whose ASCII-alnum edges
// are not glued to further ASCII-alnum characters.
bool contains_bounded(std::u32string_view hay, std::u32string_view needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t pos = 0; pos + needle.size() <= hay.size(); ++pos) {
    if (hay.substr(pos, needle.size()) != needle) continue;
    const bool left_ok =
        !is_ascii_alnum(needle.front()) || pos == 0 || !is_ascii_alnum(hay[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok =
        !is_ascii_alnum(needle.back()) || end == hay.size() || !is_ascii_alnum(hay[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::u32string fold(std::string_view s) {
  return text::decode_utf8(text::ascii_lower(s));
}

}  // namespace

std::string_view answer_prefix(Language language) {
  return language == Language::kZh ? "因此得出，答案：" : "Therefore, the answer is:";
}

std::string answer_sentence(Language language, std::string_view label) {
  std::string out(answer_prefix(language));
  if (language == Language::kEn) out += ' ';
  out += label;
  return out;
}

const std::vector<std::string>& default_answer_prefixes() {
  static const std::vector<std::string> kPrefixes = {
      "Therefore, the answer is:",
      "因此得出，答案：",
      "Therefore, the answer is :",
      "Therefore the answer is:",
      "Thus, the answer is:",
      "So the answer is:",
      "因此得出，答案:",
      "因此得出答案：",
      "因此，得出答案：",
      "因此，得出答案:",
      "因此，答案是：",
      "因此，答案是",
      "因此答案是",
  };
  return kPrefixes;
}

AnswerParser AnswerParser::for_dataset(const DatasetSpec& spec) {
  AnswerParser parser;
  parser.label_space = spec.label_space;
  return parser;
}

std::string strip_trailing_punct(std::string_view s) {
  auto cps = text::decode_utf8(s);
  std::size_t begin = 0;
  std::size_t end = cps.size();
  auto trailing = [&](char32_t c) {
    return text::is_white_space(c) || kTrailingPunct.find(c) != std::u32string_view::npos;
  };
  auto leading = [&](char32_t c) {
    return text::is_white_space(c) || kLeadingPunct.find(c) != std::u32string_view::npos;
  };
  while (end > begin && trailing(cps[end - 1])) --end;
  while (begin < end && leading(cps[begin])) ++begin;
  return text::encode_utf8(std::u32string_view(cps).substr(begin, end - begin));
}

std::optional<std::string> match_label(std::string_view input,
                                       const std::vector<std::string>& label_space) {
  const auto cleaned = strip_trailing_punct(input);
  if (cleaned.empty() || label_space.empty()) return std::nullopt;
  const auto hay = fold(cleaned);

  for (const auto& label : label_space) {
    if (fold(label) == hay) return label;
  }

  std::vector<const std::string*> by_length;
  for (const auto& label : label_space) by_length.push_back(&label);
  std::stable_sort(by_length.begin(), by_length.end(), [](const auto* a, const auto* b) {
    return text::code_point_count(*a) > text::code_point_count(*b);
  });

  for (const auto* label : by_length) {
    const auto needle = fold(*label);
    if (needle.empty() || needle.size() > hay.size()) continue;
    if (hay.compare(0, needle.size(), needle) != 0) continue;
    if (needle.size() == hay.size() || !text::is_letter_or_digit(hay[needle.size()])) {
      return *label;
    }
  }

  const std::string* best = nullptr;
  std::size_t best_len = 0;
  bool tied = false;
  for (const auto* label : by_length) {
    const auto needle = fold(*label);
    if (!contains_bounded(hay, needle)) continue;
    if (!best || needle.size() > best_len) {
      best = label;
      best_len = needle.size();
      tied = false;
    } else if (needle.size() == best_len && *label != *best) {
      tied = true;
    }
  }
  if (!best || tied) return std::nullopt;
  return *best;
}

namespace {

struct PrefixHit {
  std::size_t pos = std::string_view::npos;
  std::size_t len = 0;
};

PrefixHit last_prefix(std::string_view text, const std::vector<std::string>& prefixes) {
  PrefixHit hit;
  for (const auto& p : prefixes) {
    if (p.empty()) continue;
    const auto pos = text.rfind(p);
    if (pos == std::string_view::npos) continue;
    if (hit.pos == std::string_view::npos || pos > hit.pos ||
        (pos == hit.pos && p.size() > hit.len)) {
      hit = PrefixHit{pos, p.size()};
    }
  }
  return hit;
}

}  // namespace

std::optional<std::string> answer_tail(std::string_view text,
                                       const std::vector<std::string>& prefixes) {
  const auto hit = last_prefix(text, prefixes);
  if (hit.pos == std::string_view::npos) return std::nullopt;
  auto tail = text.substr(hit.pos + hit.len);
  const auto first_content = tail.find_first_not_of(" \t\r\n");
  if (first_content == std::string_view::npos) return std::string();
  tail = tail.substr(first_content);
  const auto newline = tail.find('\n');
  if (newline != std::string_view::npos) tail = tail.substr(0, newline);
  return text::trim(tail);
}

std::string rationale_body(std::string_view text, const std::vector<std::string>& prefixes) {
  const auto hit = last_prefix(text, prefixes);
  if (hit.pos == std::string_view::npos) return text::trim(text);
  return text::trim(text.substr(0, hit.pos));
}

std::optional<std::string> extract_final_answer(std::string_view rationale_text,
                                                const AnswerParser& parser) {
  const auto tail = answer_tail(rationale_text, parser.prefixes);
  if (!tail) return std::nullopt;
  if (parser.label_space.empty()) {
    const auto spans = parse_span_text(strip_trailing_punct(*tail));
    if (spans.empty()) return std::nullopt;
    return label_text(Label(spans));
  }
  return match_label(*tail, parser.label_space);
}

}  // namespace rforge
