#include "rforge/tokenizer.hpp"

#include <fstream>

#include "rforge/error.hpp"
#include "rforge/text.hpp"

namespace rforge {

std::size_t FallbackTokenizer::count(std::string_view input) const {
  std::size_t tokens = 0;
  for (const auto& segment : text::word_segments(input)) {
    bool in_run = false;
    for (char32_t c : text::decode_utf8(segment)) {
      if (text::is_white_space(c)) {
        in_run = false;
      } else if (text::is_cjk(c)) {
        ++tokens;
        in_run = false;
      } else if (!in_run) {
        ++tokens;
        in_run = true;
      }
    }
  }
  return tokens;
}

VocabTokenizer::VocabTokenizer(const std::filesystem::path& vocab_file)
    : source_(vocab_file.filename().string()) {
  std::ifstream in(vocab_file);
  if (!in) {
    throw Error(ErrorCode::kTokenizerLoadFailure, "cannot open " + vocab_file.string());
  }
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    max_len_ = std::max(max_len_, line.size());
    vocab_.insert(std::move(line));
  }
  if (vocab_.empty()) {
    throw Error(ErrorCode::kTokenizerLoadFailure, vocab_file.string() + " is empty");
  }
}

std::size_t VocabTokenizer::count(std::string_view input) const {
  std::size_t tokens = 0;
  std::size_t pos = 0;
  while (pos < input.size()) {
    std::size_t step = 0;
    const std::size_t longest = std::min(max_len_, input.size() - pos);
    for (std::size_t len = longest; len > 0; --len) {
      if (vocab_.count(std::string(input.substr(pos, len)))) {
        step = len;
        break;
      }
    }
    if (step == 0) {
      // One code point.
      step = 1;
      while (pos + step < input.size() &&
             (static_cast<unsigned char>(input[pos + step]) & 0xC0) == 0x80) {
        ++step;
      }
    }
    pos += step;
    ++tokens;
  }
  return tokens;
}

std::shared_ptr<const Tokenizer> make_tokenizer(const std::string& vocab_file) {
  if (vocab_file.empty()) return std::make_shared<FallbackTokenizer>();
  return std::make_shared<VocabTokenizer>(vocab_file);
}

}  // namespace rforge
