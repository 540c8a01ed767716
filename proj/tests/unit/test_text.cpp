#include <doctest.h>

#include <string>
#include <vector>

#include "fixtures.hpp"
#include "rforge/answer.hpp"
#include "rforge/hash.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/rng.hpp"
#include "rforge/text.hpp"
#include "rforge/tokenizer.hpp"

using namespace rforge;

TEST_SUITE("text") {
  TEST_CASE("utf8 round trip and code point counts") {
    const std::string s = "你好, world \xF0\x9F\x98\x80";
    CHECK(text::encode_utf8(text::decode_utf8(s)) == s);
    CHECK(text::code_point_count(s) == 11);
    CHECK(text::decode_utf8("\xFF") == std::u32string(1, U'�'));
  }

  TEST_CASE("nfc and trim") {
    CHECK(text::nfc("Cafe\xCC\x81") == "Caf\xC3\xA9");
    CHECK(text::trim("\xE3\x80\x80  abc \t\n") == "abc");
    CHECK(text::trim_right("  a  ") == "  a");
  }

  TEST_CASE("replace_all and split") {
    std::string s = "a-{x}-{x}";
    text::replace_all(s, "{x}", "yy");
    CHECK(s == "a-yy-yy");
    CHECK(text::split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
  }

  TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("rng is reproducible and bounded") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
      CHECK(c.below(13) < 13);
      const double u = c.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
    CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
    CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
    CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
  }

  TEST_CASE("jsonl writes sorted keys and reads back") {
    fixtures::TempDir dir;
    const auto path = dir / "a.jsonl";
    write_jsonl(path, {json{{"b", 1}, {"a", "中"}}, json{{"z", nullptr}}});
    CHECK(read_text_file(path) == "{\"a\":\"中\",\"b\":1}\n{\"z\":null}\n");
    const auto rows = read_jsonl(path);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["a"] == "中");
  }

  TEST_CASE("answer sentences") {
    CHECK(answer_sentence(Language::kEn, "Matched") == "Therefore, the answer is: Matched");
    CHECK(answer_sentence(Language::kZh, "匹配") == "因此得出，答案：匹配");
    CHECK(strip_trailing_punct("匹配。 ") == "匹配");
    CHECK(strip_trailing_punct("Positive.") == "Positive");
  }

  TEST_CASE("extract_final_answer") {
    AnswerParser zh{{"匹配", "不匹配"}};
    CHECK(extract_final_answer("两句都在问天气。因此得出，答案：匹配", zh) == "匹配");
    CHECK(extract_final_answer("两句话意思不同。因此得出，答案：不匹配。", zh) == "不匹配");
    CHECK_FALSE(extract_final_answer("没有结论", zh).has_value());

    AnswerParser options{{"A", "B", "C", "D"}};
    CHECK(extract_final_answer("It is in China. Therefore, the answer is: C. Shanghai", options) ==
          "C");
    // The last prefix wins.
    AnswerParser en{{"Positive", "Negative"}};
    CHECK(extract_final_answer("Therefore, the answer is: Negative? No. Therefore, the answer "
                               "is: Positive",
                               en) == "Positive");
    CHECK_FALSE(extract_final_answer("Therefore, the answer is: maybe", en).has_value());
  }

  TEST_CASE("match_label rules") {
    const std::vector<std::string> space{"entailment", "neutral", "contradiction"};
    CHECK(match_label(" neutral. ", space) == "neutral");
    CHECK(match_label("contradiction, clearly", space) == "contradiction");
    CHECK(match_label("I think it is neutral overall", space) == "neutral");
    // A label opening the answer wins over later mentions.
    CHECK(match_label("neutral or contradiction", space) == "neutral");
    CHECK(match_label("C. A lot of tea", {"A", "B", "C", "D"}) == "C");
    // Otherwise the longest contained label wins; equal-length ties are none.
    CHECK(match_label("maybe neutral or contradiction", space) == "contradiction");
    CHECK_FALSE(match_label("it is A or B", {"A", "B"}).has_value());
    // Longest containment: 不匹配 contains 匹配.
    CHECK(match_label("结论是不匹配", {"匹配", "不匹配"}) == "不匹配");
  }
}

namespace {

// Independent segmenter oracle: texts are assembled from pieces whose token
// counts are known by construction (a word, a number, one Han character or
// one punctuation mark each count 1), joined so that no word-boundary rule
// can merge two pieces.
struct Piece {
  std::string text;
  bool joinable;  // may touch the previous piece without a space
};

std::string build_text(fixtures::Gen& g, std::size_t pieces, std::size_t& expected) {
  static const std::vector<std::string> words{"alpha", "Beta", "gamma", "rationale", "x"};
  static const std::vector<std::string> numbers{"7", "42", "1024", "3"};
  static const std::vector<std::string> han{"你", "好", "标", "签", "匹", "配", "天"};
  static const std::vector<std::string> punct{",", "!", "?", "(", ")", "。", "，"};
  static const std::vector<std::string> spaces{" ", "  ", "\t", "\xE3\x80\x80"};
  std::string out;
  expected = 0;
  bool prev_word = false;
  bool prev_punct = false;
  for (std::size_t i = 0; i < pieces; ++i) {
    const auto kind = g.size(0, 3);
    std::string piece;
    bool is_word = false;
    bool is_punct = false;
    if (kind == 0) {
      piece = g.pick(words);
      is_word = true;
    } else if (kind == 1) {
      piece = g.pick(numbers);
      is_word = true;
    } else if (kind == 2) {
      piece = g.pick(han);
    } else {
      piece = g.pick(punct);
      is_punct = true;
    }
    const bool need_space = i > 0 && ((is_word && prev_word) || prev_punct || is_punct);
    if (need_space || (i > 0 && g.coin())) out += g.pick(spaces);
    out += piece;
    ++expected;
    prev_word = is_word;
    prev_punct = is_punct;
  }
  if (g.coin()) out += g.pick(spaces);
  return out;
}

}  // namespace

TEST_SUITE("text") {
  TEST_CASE("fallback tokenizer fixtures") {
    FallbackTokenizer t;
    CHECK(t.count("") == 0);
    CHECK(t.count("你好 world") == 3);
    CHECK(t.count("   ") == 0);
    CHECK(t.count("Hello, world!") == 4);
  }

  TEST_CASE("fallback tokenizer agrees with the segment oracle") {
    FallbackTokenizer t;
    fixtures::Gen g(2024);
    for (int trial = 0; trial < 500; ++trial) {
      std::size_t expected = 0;
      const auto s = build_text(g, g.size(0, 40), expected);
      INFO("text: " << s);
      CHECK(t.count(s) == expected);
    }
  }

  TEST_CASE("vocab tokenizer") {
    fixtures::TempDir dir;
    write_text_file(dir / "vocab.txt", "ab\nabc\n你好\n");
    VocabTokenizer t(dir / "vocab.txt");
    CHECK(t.vocab_size() == 3);
    CHECK(t.count("abcab") == 2);
    CHECK(t.count("你好吗") == 2);
    CHECK(t.count("") == 0);
    CHECK(fixtures::error_of([&] { VocabTokenizer missing(dir / "none.txt"); }) ==
          ErrorCode::kTokenizerLoadFailure);
    write_text_file(dir / "empty.txt", "\n");
    CHECK(fixtures::error_of([&] { make_tokenizer((dir / "empty.txt").string()); }) ==
          ErrorCode::kTokenizerLoadFailure);
  }
}
