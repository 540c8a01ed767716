#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rforge::text {

// UTF-8 <-> code points. Malformed bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
std::string encode_utf8(char32_t c);

std::size_t code_point_count(std::string_view s);

// Unicode NFC normalization.
std::string nfc(std::string_view s);

// Strips Unicode white space (including U+3000) from both ends.
std::string trim(std::string_view s);
std::string trim_right(std::string_view s);

bool is_white_space(char32_t c);
// Han, Hiragana, Katakana.
bool is_cjk(char32_t c);
bool is_letter_or_digit(char32_t c);

// Segments on Unicode word boundaries (UAX #29). Returns every segment,
// including white space and punctuation runs.
std::vector<std::string> word_segments(std::string_view s);

// ASCII-only case folding; other bytes pass through.
std::string ascii_lower(std::string_view s);

bool contains(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char delimiter);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Replaces every occurrence of `from` (non-empty) in place.
void replace_all(std::string& s, std::string_view from, std::string_view to);

}  // namespace rforge::text
