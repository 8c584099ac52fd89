#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fimkit/lexer.hpp"
#include "fimkit/util.hpp"

using namespace fimkit;
using namespace fimkit::lex;

namespace {

std::string span_text(std::string_view text, const Span& s) {
  return std::string(text.substr(s.begin, s.end - s.begin));
}

void check_partition(std::string_view text, const std::vector<Span>& spans) {
  std::string rebuilt;
  std::size_t prev_end = 0;
  for (const auto& s : spans) {
    CHECK(s.begin == prev_end);
    CHECK(s.end > s.begin);
    rebuilt += span_text(text, s);
    prev_end = s.end;
  }
  CHECK(prev_end == text.size());
  CHECK(rebuilt == text);
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::string alphabet = "ab01_ (){}#\"'\n\t =+.";
  std::size_t len = draw_below(rng, max_len + 1);
  std::string out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(alphabet[draw_below(rng, alphabet.size())]);
  return out;
}

}  // namespace

TEST_CASE("classify: code, trailing blanks, comment") {
  const auto& py = builtin_profile("python");
  auto spans = classify("x = 1  # y", py);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].kind == TokenClass::Code);
  CHECK(span_text("x = 1  # y", spans[0]) == "x = 1");
  CHECK(spans[1].kind == TokenClass::Whitespace);
  CHECK(spans[2].kind == TokenClass::Comment);
  CHECK(span_text("x = 1  # y", spans[2]) == "# y");
  check_partition("x = 1  # y", spans);
}

TEST_CASE("classify: empty input and whole-string literal") {
  const auto& py = builtin_profile("python");
  CHECK(classify("", py).empty());
  auto spans = classify("\"abc\"", py);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].kind == TokenClass::StringLiteral);
  CHECK(span_text("\"abc\"", spans[0]) == "\"abc\"");
}

TEST_CASE("classify: comment-only middles and numbers") {
  const auto& py = builtin_profile("python");
  auto spans = classify("# c1\n# c2", py);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].kind == TokenClass::Comment);
  CHECK(spans[1].kind == TokenClass::Whitespace);
  CHECK(spans[2].kind == TokenClass::Comment);

  auto nums = classify("0x3f 0x2a", py);
  REQUIRE(nums.size() == 1);
  CHECK(nums[0].kind == TokenClass::NumericLiteral);

  // An identifier pulls the group back to Code.
  auto code = classify("return 42", py);
  REQUIRE(code.size() == 1);
  CHECK(code[0].kind == TokenClass::Code);
}

TEST_CASE("classify: block comments and strings with escapes") {
  const auto& cpp = builtin_profile("cpp");
  std::string text = "int a; /* b \" */ f(\"x\\\"y\");";
  auto spans = classify(text, cpp);
  check_partition(text, spans);
  bool saw_comment = false, saw_string = false;
  for (const auto& s : spans) {
    if (s.kind == TokenClass::Comment) {
      saw_comment = true;
      CHECK(span_text(text, s) == "/* b \" */");
    }
    if (s.kind == TokenClass::StringLiteral) {
      saw_string = true;
      CHECK(span_text(text, s) == "\"x\\\"y\"");
    }
  }
  CHECK(saw_comment);
  CHECK(saw_string);
}

TEST_CASE("classify: unknown language id") {
  CHECK_THROWS_WITH_AS(builtin_profile("cobol"), doctest::Contains("cobol"),
                       std::invalid_argument);
}

TEST_CASE("classify partitions random inputs deterministically") {
  const auto& py = builtin_profile("python");
  const auto& cpp = builtin_profile("cpp");
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    std::string text = random_text(rng, 120);
    for (const auto* profile : {&py, &cpp}) {
      auto spans = classify(text, *profile);
      check_partition(text, spans);
      auto again = classify(text, *profile);
      REQUIRE(spans.size() == again.size());
      for (std::size_t k = 0; k < spans.size(); ++k) {
        CHECK(spans[k].begin == again[k].begin);
        CHECK(spans[k].kind == again[k].kind);
      }
    }
  }
}

TEST_CASE("chunks: lines, char n-grams, tokens") {
  const auto& py = builtin_profile("python");
  CHECK(chunks("a\nb\na", Chunking::line(), py) == std::vector<std::string>{"a", "b", "a"});
  CHECK(chunks("ab", Chunking::char_ngram(2), py) == std::vector<std::string>{"ab"});
  CHECK(chunks("foo(bar)", Chunking::token(), py) ==
        std::vector<std::string>{"foo", "(", "bar", ")"});
  // comments are not tokens
  CHECK(chunks("x # c", Chunking::token(), py) == std::vector<std::string>{"x"});
}

TEST_CASE("chunks: char n-gram cardinality") {
  const auto& py = builtin_profile("python");
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    std::string text = random_text(rng, 40);
    int n = static_cast<int>(draw_below(rng, 5)) + 1;
    auto grams = chunks(text, Chunking::char_ngram(n), py);
    std::size_t cp = codepoint_count(text);
    std::size_t expected = cp + 1 > static_cast<std::size_t>(n) ? cp - n + 1 : 0;
    CHECK(grams.size() == expected);
  }
}

TEST_CASE("count_tokens: basics and subword consistency") {
  const auto& py = builtin_profile("python");
  CHECK(count_tokens("") == 0);
  CHECK(count_tokens("hello world") == chunks("hello world", Chunking::subword(), py).size());
  CHECK(count_tokens("hello world") == 3);
}

TEST_CASE("count_tokens: lower bound and concatenation monotonicity") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    std::string a = random_text(rng, 60);
    std::string b = random_text(rng, 60);
    std::size_t ca = count_tokens(a);
    std::size_t cb = count_tokens(b);
    std::size_t cab = count_tokens(a + b);
    CHECK(cab <= ca + cb + 1);
    std::size_t cp = codepoint_count(a);
    CHECK(ca >= (cp + kMaxSubwordLen - 1) / kMaxSubwordLen);
  }
}

TEST_CASE("count_tokens: never decreases as a string grows in place") {
  // budget trimming binary-searches on kept length, which needs this
  std::mt19937_64 rng(29);
  for (int i = 0; i < 200; ++i) {
    std::string head = random_text(rng, 30);
    std::string grow = random_text(rng, 40);
    std::string tail = random_text(rng, 30);
    std::size_t prev = 0;
    auto offs = codepoint_offsets(grow);
    for (std::size_t k = 0; k < offs.size(); ++k) {
      std::size_t c = count_tokens(head + grow.substr(0, offs[k]) + tail);
      if (k > 0) CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("block boundaries: indent based") {
  const auto& py = builtin_profile("python");
  std::string text = "def f():\n    a = 1\n    b = 2\n    return a + b\nprint(1)\n";
  auto blocks = block_boundaries(text, py);
  std::size_t body = text.find("    a = 1");
  std::size_t dedent = text.find("print");
  CHECK(std::count(blocks.begin(), blocks.end(), body) == 1);
  CHECK(std::count(blocks.begin(), blocks.end(), dedent) == 1);
}

TEST_CASE("block boundaries: braces skip strings and comments") {
  const auto& cpp = builtin_profile("cpp");
  std::string text = "void f() { g(\"{\"); } // {\n";
  auto blocks = block_boundaries(text, cpp);
  std::size_t open_after = text.find('{') + 1;
  std::size_t close_at = text.rfind('}');
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0] == open_after);
  CHECK(blocks[1] == close_at);
}

TEST_CASE("profile validation rejects prefix collisions") {
  LanguageProfile p;
  p.id = "x";
  p.line_comments = {"#", "#!"};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.line_comments = {"//"};
  p.strings = {{"\"", true}, {"\"\"\"", true}};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.strings = {{"\"", true}};
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("profiles load from a config document") {
  namespace fs = std::filesystem;
  fs::path file = fs::temp_directory_path() / "fimkit_profiles_test.json";
  {
    std::ofstream out(file);
    out << R"({"mylang": {"line_comment": [";"], "strings": ["\""],
               "blocks": [["begin", "end"]], "indent_based": false}})";
  }
  auto profiles = load_profiles(file.string());
  REQUIRE(profiles.count("mylang") == 1);
  const auto& p = resolve_profile(profiles, "mylang");
  auto spans = classify("x ; c", p);
  CHECK(spans.back().kind == TokenClass::Comment);
  // built-ins still resolve, unknown ids still throw
  CHECK_NOTHROW(resolve_profile(profiles, "go"));
  CHECK_THROWS_AS(resolve_profile(profiles, "fortran"), std::invalid_argument);
  fs::remove(file);
}

TEST_CASE("language_for_extension") {
  CHECK(language_for_extension("py") == "python");
  CHECK(language_for_extension("rs") == "rust");
  CHECK(language_for_extension("xyz").empty());
}
