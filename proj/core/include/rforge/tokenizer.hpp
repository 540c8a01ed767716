#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>

namespace rforge {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

// Default tokenizer: Unicode word-boundary segments, white space dropped,
// every Han/Hiragana/Katakana character a token of its own.
// "你好 world" -> 3.
class FallbackTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::string name() const override { return "fallback-uax29"; }
};

// Greedy longest-match over a vocabulary file (one token per line, UTF-8).
// Code points not covered by any vocabulary entry count one token each.
class VocabTokenizer final : public Tokenizer {
 public:
  // Throws kTokenizerLoadFailure when the file is missing or empty.
  explicit VocabTokenizer(const std::filesystem::path& vocab_file);

  std::size_t count(std::string_view text) const override;
  std::string name() const override { return "vocab:" + source_; }
  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  std::unordered_set<std::string> vocab_;
  std::size_t max_len_ = 0;  // bytes
  std::string source_;
};

// Fallback when `vocab_file` is empty, otherwise a VocabTokenizer.
std::shared_ptr<const Tokenizer> make_tokenizer(const std::string& vocab_file);

inline std::size_t token_count(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.count(text);
}

}  // namespace rforge
