#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fimkit::lex {

enum class TokenClass { Comment, StringLiteral, NumericLiteral, Whitespace, Code };

const char* to_string(TokenClass k);

// Half-open byte range [begin, end) with a single class. classify() returns
// spans that partition the input: contiguous, non-overlapping, full coverage.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  TokenClass kind = TokenClass::Code;
};

struct StringRule {
  std::string delim;
  bool escape = true;  // backslash escapes the next character
};

struct LanguageProfile {
  std::string id;
  std::vector<std::string> line_comments;
  std::vector<std::pair<std::string, std::string>> block_comments;
  std::vector<StringRule> strings;
  std::vector<std::pair<std::string, std::string>> blocks;
  bool indent_based = false;

  // Throws std::invalid_argument when a delimiter is empty or one delimiter
  // prefixes another within the same category.
  void validate() const;
};

enum class Granularity { Line, Token, Subword, CharNGram };

struct Chunking {
  Granularity granularity = Granularity::Line;
  int ngram = 1;  // >= 1, used by CharNGram only

  static Chunking line() { return {Granularity::Line, 1}; }
  static Chunking token() { return {Granularity::Token, 1}; }
  static Chunking subword() { return {Granularity::Subword, 1}; }
  static Chunking char_ngram(int n) { return {Granularity::CharNGram, n}; }
};

// Minimal lexer: comments and strings come from the profile's delimiters.
// Plain text in between is coalesced so that runs of code tokens joined by
// single blanks form one Code span, number-only groups form NumericLiteral
// spans, and remaining whitespace runs form Whitespace spans.
std::vector<Span> classify(std::string_view text, const LanguageProfile& profile);

// Chunk multiset for IoU-style similarity.
//   Line      physical lines, trailing newline removed
//   Token     code/string/numeric spans split into identifier runs and
//             single punctuation characters, whitespace dropped
//   Subword   class-run segmentation capped at MAX_SUBWORD_LEN code points
//   CharNGram overlapping code-point n-grams of the raw text
std::vector<std::string> chunks(std::string_view text, Chunking chunking,
                                const LanguageProfile& profile);

inline constexpr std::size_t kMaxSubwordLen = 8;

// Number of subword tokens. Deterministic; count("") == 0;
// count(a + b) <= count(a) + count(b) + 1.
std::size_t count_tokens(std::string_view text);

// Byte offsets where a block body opens or closes: just after an opening
// delimiter / at a closing delimiter for brace profiles, at the start of a
// line whose indent changed (plus EOF while indented) for indent profiles.
// Sorted, unique. Delimiters inside comments and strings do not count.
std::vector<std::size_t> block_boundaries(std::string_view text,
                                          const LanguageProfile& profile);

// Built-in profiles. Throws std::invalid_argument naming an unknown id.
const LanguageProfile& builtin_profile(std::string_view language);
std::vector<std::string> builtin_languages();

// Profile config file: one JSON document keyed by language id, values with
// keys line_comment, block_comment, strings, blocks, indent_based.
std::map<std::string, LanguageProfile> load_profiles(const std::string& path);

// Lookup in `extra` first, then built-ins. Throws when the id is unknown.
const LanguageProfile& resolve_profile(const std::map<std::string, LanguageProfile>& extra,
                                       std::string_view language);

// Maps a file extension (e.g. "py") to a built-in language id, or "".
std::string language_for_extension(std::string_view ext);

}  // namespace fimkit::lex
