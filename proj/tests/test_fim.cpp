#include <doctest.h>

#include <random>

#include "fimkit/fim.hpp"
#include "fimkit/lexer.hpp"
#include "fimkit/util.hpp"

using namespace fimkit;
using namespace fimkit::fim;

namespace {

SourceFile make_file(std::string text, std::string lang = "python") {
  SourceFile f;
  f.path = "fixture." + std::string(lang == "python" ? "py" : "txt");
  f.text = std::move(text);
  f.language = std::move(lang);
  return f;
}

std::string random_file(std::mt19937_64& rng, std::size_t max_len) {
  static const std::string alphabet = "abcxyz_01 ():=+\n\t#\"";
  std::size_t len = draw_below(rng, max_len) + 1;
  std::string out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(alphabet[draw_below(rng, alphabet.size())]);
  return out;
}

}  // namespace

TEST_CASE("split_random: reconstruction, cut fixture, single char") {
  SourceFile abcd = make_file("abcd");
  bool found_13 = false;
  for (std::uint64_t seed = 0; seed < 500 && !found_13; ++seed) {
    auto ex = split_random(abcd, seed);
    CHECK(ex.prefix + ex.middle + ex.suffix == "abcd");
    CHECK(ex.split_strategy == SplitStrategy::Random);
    if (ex.prefix == "a" && ex.middle == "bc" && ex.suffix == "d") found_13 = true;
  }
  CHECK(found_13);  // cuts (1,3) are reachable and reconstruct exactly

  auto one = split_random(make_file("x"), 7);
  CHECK(one.prefix.empty());
  CHECK(one.middle == "x");
  CHECK(one.suffix.empty());

  CHECK_THROWS_AS(split_random(make_file(""), 1), std::invalid_argument);
}

TEST_CASE("split_random: determinism and non-empty middle") {
  std::mt19937_64 rng(101);
  for (int i = 0; i < 200; ++i) {
    SourceFile f = make_file(random_file(rng, 80));
    std::uint64_t seed = rng();
    auto a = split_random(f, seed);
    auto b = split_random(f, seed);
    CHECK(a.prefix == b.prefix);
    CHECK(a.middle == b.middle);
    CHECK(a.suffix == b.suffix);
    CHECK(!a.middle.empty());
    CHECK(a.prefix + a.middle + a.suffix == f.text);
  }
}

TEST_CASE("split_scope_aware: forced block weights pick the function body") {
  const auto& py = lex::builtin_profile("python");
  // Ends while indented, so the only block candidates are the body start and EOF.
  SourceFile f = make_file("def f():\n    a = 1\n    b = 2\n    return a + b\n");
  ScopeWeights block_only{1.0, 0.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ex = split_scope_aware(f, py, seed, block_only);
    CHECK(ex.middle == "    a = 1\n    b = 2\n    return a + b\n");
    CHECK(ex.boundary_start == Boundary::BlockBoundary);
    CHECK(ex.boundary_end == Boundary::BlockBoundary);
    CHECK(ex.split_strategy == SplitStrategy::ScopeAware);
  }
}

TEST_CASE("split_scope_aware: line-start weights put a newline before the middle") {
  const auto& py = lex::builtin_profile("python");
  SourceFile f = make_file("a = 1\nb = 2\nc = 3\nd = 4\n");
  ScopeWeights line_only{0.0, 1.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ex = split_scope_aware(f, py, seed, line_only);
    CHECK(ex.boundary_start == Boundary::LineStart);
    if (!ex.prefix.empty()) CHECK(ex.prefix.back() == '\n');
  }
}

TEST_CASE("split_scope_aware: cap, determinism, reconstruction") {
  const auto& py = lex::builtin_profile("python");
  std::mt19937_64 rng(55);
  int produced = 0;
  for (int i = 0; i < 200; ++i) {
    SourceFile f = make_file(random_file(rng, 2000));
    std::uint64_t seed = rng();
    try {
      auto a = split_scope_aware(f, py, seed);
      auto b = split_scope_aware(f, py, seed);
      ++produced;
      CHECK(a.prefix + a.middle + a.suffix == f.text);
      CHECK(a.middle == b.middle);
      CHECK(!a.middle.empty());
      CHECK(codepoint_count(a.middle) <= kMaxMiddleChars);
    } catch (const std::runtime_error&) {
      // admissible: some random files have no candidate pair
    }
  }
  CHECK(produced > 150);
}

TEST_CASE("splits land on code point boundaries in multibyte files") {
  SourceFile f = make_file("väl = \"ünïcode\"\nnästa = väl\n");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto ex = split_random(f, seed);
    CHECK(ex.prefix + ex.middle + ex.suffix == f.text);
    // every part must decode cleanly: byte length equals re-encoded length
    for (const std::string* part : {&ex.prefix, &ex.middle, &ex.suffix}) {
      auto decoded = decode_utf8(*part);
      std::size_t bytes = 0;
      for (char32_t c : decoded) bytes += c < 0x80 ? 1 : c < 0x800 ? 2 : c < 0x10000 ? 3 : 4;
      CHECK(bytes == part->size());
    }
  }
}

TEST_CASE("split_scope_aware: no candidates raises") {
  const auto& py = lex::builtin_profile("python");
  SourceFile f = make_file("abc");
  ScopeWeights block_only{1.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(split_scope_aware(f, py, 3, block_only), std::runtime_error);
}

TEST_CASE("boundary_at classifications") {
  std::string text = "ab cd\nef";
  std::vector<std::size_t> no_blocks;
  CHECK(boundary_at(text, 0, no_blocks) == Boundary::LineStart);
  CHECK(boundary_at(text, 6, no_blocks) == Boundary::LineStart);   // after '\n'
  CHECK(boundary_at(text, 1, no_blocks) == Boundary::TokenMiddle); // a|b
  CHECK(boundary_at(text, 3, no_blocks) == Boundary::LineMiddle);  // after space
  CHECK(boundary_at(text, 2, no_blocks) == Boundary::LineMiddle);  // before space
  std::vector<std::size_t> blocks = {1};
  CHECK(boundary_at(text, 1, blocks) == Boundary::BlockBoundary);
}

TEST_CASE("sentinels: validation and collision detection") {
  SentinelSet s;
  CHECK_NOTHROW(s.validate());
  SentinelSet dup{"<m>", "<m>", "<x>"};
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
  SentinelSet empty{"", "<p>", "<m>"};
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  FimExample ex;
  ex.prefix = "a<|fim_middle|>b";
  ex.middle = "m";
  ex.suffix = "s";
  ctx::ContextBundle none;
  CHECK_THROWS_AS(render_prompt(ex, none, SentinelSet{}, 1000), std::invalid_argument);
}

namespace {

FimExample simple_example() {
  FimExample ex;
  ex.path = "a.py";
  ex.language = "python";
  ex.prefix = "def add(a, b):\n";
  ex.middle = "    return a + b\n";
  ex.suffix = "\nprint(add(1, 2))\n";
  return ex;
}

ctx::ContextBundle bundle_with(std::vector<std::pair<std::string, double>> texts) {
  ctx::ContextBundle b;
  b.strategy = "rag";
  int i = 0;
  for (auto& [text, score] : texts) {
    ctx::ContextChunk c;
    c.path = "ctx" + std::to_string(i++) + ".py";
    c.start_line = 1;
    c.end_line = static_cast<int>(split_lines(text).size());
    c.text = text;
    c.score = score;
    b.chunks.push_back(std::move(c));
  }
  std::sort(b.chunks.begin(), b.chunks.end(),
            [](const ctx::ContextChunk& x, const ctx::ContextChunk& y) { return x.score > y.score; });
  return b;
}

}  // namespace

TEST_CASE("render_prompt: no-truncation layout is S-P-M") {
  FimExample ex = simple_example();
  ctx::ContextBundle none;
  SentinelSet s;
  auto prompt = render_prompt(ex, none, s, 4096);
  CHECK(prompt.text == s.suffix_marker + ex.suffix + s.prefix_marker + ex.prefix + s.middle_marker);
  CHECK(prompt.token_count <= 4096);
  std::size_t spos = prompt.text.find(s.suffix_marker);
  std::size_t ppos = prompt.text.find(s.prefix_marker);
  CHECK(spos < ppos);
}

TEST_CASE("render_prompt: exact budget excludes the context section") {
  FimExample ex = simple_example();
  SentinelSet s;
  std::string bare = s.suffix_marker + ex.suffix + s.prefix_marker + ex.prefix + s.middle_marker;
  std::size_t budget = lex::count_tokens(bare);
  auto bundle = bundle_with({{"import math\nx = math.pi\n", 0.9}});
  auto prompt = render_prompt(ex, bundle, s, budget);
  CHECK(prompt.context_chunks_used == 0);
  CHECK(prompt.text == bare);
  CHECK(prompt.token_count == budget);
}

TEST_CASE("render_prompt: context drops lowest score first") {
  FimExample ex = simple_example();
  SentinelSet s;
  auto bundle = bundle_with({{"high scoring context chunk\n", 0.9},
                             {"low scoring context chunk filler filler\n", 0.1}});
  std::string bare = s.suffix_marker + ex.suffix + s.prefix_marker + ex.prefix + s.middle_marker;
  // room for the first chunk but not both
  std::string one_chunk = bundle.chunks[0].path + ":1-1\n" + bundle.chunks[0].text;
  std::size_t budget = lex::count_tokens(one_chunk + bare);
  auto prompt = render_prompt(ex, bundle, s, budget);
  CHECK(prompt.context_chunks_used == 1);
  CHECK(prompt.text.find("high scoring") != std::string::npos);
  CHECK(prompt.text.find("low scoring") == std::string::npos);
}

TEST_CASE("render_prompt: suffix keeps its head, prefix keeps its tail") {
  FimExample ex;
  ex.prefix = "PPPP prefix_head keep_tail_here\n";
  ex.middle = "m";
  ex.suffix = "suffix_head_kept then_trimmed_tail\n";
  SentinelSet s;
  ctx::ContextBundle none;
  std::size_t full = lex::count_tokens(s.suffix_marker + ex.suffix + s.prefix_marker + ex.prefix +
                                       s.middle_marker);
  auto prompt = render_prompt(ex, none, s, full - 4);
  CHECK(prompt.token_count <= full - 4);
  // suffix start survives, suffix tail goes first
  CHECK(prompt.text.find("suffix_head_kept") != std::string::npos);
  CHECK(prompt.text.find("then_trimmed_tail") == std::string::npos);
}

TEST_CASE("render_prompt: budget too small") {
  FimExample ex = simple_example();
  ctx::ContextBundle none;
  CHECK_THROWS_AS(render_prompt(ex, none, SentinelSet{}, 3), std::invalid_argument);
}

TEST_CASE("render_prompt: randomized budget compliance") {
  std::mt19937_64 rng(77);
  SentinelSet s;
  for (int i = 0; i < 300; ++i) {
    FimExample ex;
    ex.prefix = random_file(rng, 200);
    ex.middle = "m";
    ex.suffix = random_file(rng, 200);
    auto bundle = bundle_with({{random_file(rng, 120), 0.7}, {random_file(rng, 120), 0.3}});
    std::size_t min_needed = lex::count_tokens(
        s.suffix_marker + (ex.suffix.empty() ? "" : ex.suffix.substr(0, 1)) + s.prefix_marker +
        (ex.prefix.empty() ? "" : ex.prefix.substr(ex.prefix.size() - 1)) + s.middle_marker);
    std::size_t budget = min_needed + draw_below(rng, 60);
    auto prompt = render_prompt(ex, bundle, s, budget);
    CHECK(prompt.token_count <= budget);
    CHECK(prompt.text.find(s.suffix_marker) < prompt.text.find(s.prefix_marker));
  }
}

TEST_CASE("fim example json round-trip") {
  FimExample ex = simple_example();
  ex.boundary_start = Boundary::BlockBoundary;
  ex.boundary_end = Boundary::LineStart;
  ex.split_strategy = SplitStrategy::ScopeAware;
  ex.metadata["repo"] = "r";
  auto j = to_json(ex);
  auto back = example_from_json(j);
  CHECK(back.path == ex.path);
  CHECK(back.prefix == ex.prefix);
  CHECK(back.middle == ex.middle);
  CHECK(back.suffix == ex.suffix);
  CHECK(back.boundary_start == ex.boundary_start);
  CHECK(back.boundary_end == ex.boundary_end);
  CHECK(back.split_strategy == ex.split_strategy);
  CHECK(back.metadata.at("repo") == "r");
}
