#include "fimkit/lexer.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fimkit/util.hpp"

namespace fimkit::lex {

const char* to_string(TokenClass k) {
  switch (k) {
    case TokenClass::Comment: return "comment";
    case TokenClass::StringLiteral: return "string";
    case TokenClass::NumericLiteral: return "numeric";
    case TokenClass::Whitespace: return "whitespace";
    case TokenClass::Code: return "code";
  }
  return "code";
}

namespace {

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_ident(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c >= 0x80;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool starts_with(std::string_view text, std::size_t pos, std::string_view marker) {
  return text.compare(pos, marker.size(), marker) == 0;
}

void check_prefix_free(const std::vector<std::string>& items, const char* category) {
  for (const auto& a : items) {
    if (a.empty()) throw std::invalid_argument(std::string("empty delimiter in ") + category);
    for (const auto& b : items) {
      if (&a != &b && b.size() >= a.size() && b.compare(0, a.size(), a) == 0) {
        throw std::invalid_argument(std::string("delimiter '") + a + "' prefixes '" + b +
                                    "' in " + category);
      }
    }
  }
}

}  // namespace

void LanguageProfile::validate() const {
  if (id.empty()) throw std::invalid_argument("language profile without id");
  check_prefix_free(line_comments, "line_comment");
  std::vector<std::string> opens;
  for (const auto& [open, close] : block_comments) {
    if (close.empty()) throw std::invalid_argument("empty block comment close");
    opens.push_back(open);
  }
  check_prefix_free(opens, "block_comment");
  std::vector<std::string> sdelims;
  for (const auto& s : strings) sdelims.push_back(s.delim);
  check_prefix_free(sdelims, "strings");
  for (const auto& [open, close] : blocks) {
    if (open.empty() || close.empty()) throw std::invalid_argument("empty block delimiter");
  }
}

namespace {

// First pass: comment and string regions. Everything else is "plain".
struct Region {
  std::size_t begin, end;
  TokenClass kind;  // Comment, StringLiteral, or Code for plain
};

std::size_t string_end(std::string_view text, std::size_t open_end, const StringRule& rule) {
  std::size_t i = open_end;
  while (i < text.size()) {
    if (rule.escape && text[i] == '\\' && i + 1 < text.size()) {
      i += 2;
      continue;
    }
    if (starts_with(text, i, rule.delim)) return i + rule.delim.size();
    ++i;
  }
  return text.size();  // unterminated
}

std::vector<Region> scan_regions(std::string_view text, const LanguageProfile& p) {
  std::vector<Region> regions;
  std::size_t plain_start = 0;
  std::size_t i = 0;
  auto flush_plain = [&](std::size_t upto) {
    if (upto > plain_start) regions.push_back({plain_start, upto, TokenClass::Code});
  };
  while (i < text.size()) {
    std::size_t matched = 0;
    TokenClass kind = TokenClass::Code;
    // Block comments take precedence, then line comments, then strings;
    // within a category the longest delimiter wins.
    for (const auto& [open, close] : p.block_comments) {
      if (open.size() > matched && starts_with(text, i, open)) {
        std::size_t close_pos = text.find(close, i + open.size());
        std::size_t end = close_pos == std::string_view::npos ? text.size()
                                                              : close_pos + close.size();
        matched = open.size();
        kind = TokenClass::Comment;
        flush_plain(i);
        regions.push_back({i, end, kind});
        i = end;
        plain_start = i;
        break;
      }
    }
    if (matched) continue;
    for (const auto& marker : p.line_comments) {
      if (marker.size() > matched && starts_with(text, i, marker)) {
        std::size_t nl = text.find('\n', i + marker.size());
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        matched = marker.size();
        flush_plain(i);
        regions.push_back({i, end, TokenClass::Comment});
        i = end;
        plain_start = i;
        break;
      }
    }
    if (matched) continue;
    const StringRule* best = nullptr;
    for (const auto& rule : p.strings) {
      if (starts_with(text, i, rule.delim) && (!best || rule.delim.size() > best->delim.size())) {
        best = &rule;
      }
    }
    if (best) {
      std::size_t end = string_end(text, i + best->delim.size(), *best);
      flush_plain(i);
      regions.push_back({i, end, TokenClass::StringLiteral});
      i = end;
      plain_start = i;
      continue;
    }
    ++i;
  }
  flush_plain(text.size());
  return regions;
}

// Second pass atoms inside a plain region.
enum class AtomKind { Ws, Num, Code };

struct Atom {
  std::size_t begin, end;
  AtomKind kind;
  bool ident = false;  // contains an identifier run
};

std::vector<Atom> atomize(std::string_view text, std::size_t begin, std::size_t end) {
  std::vector<Atom> atoms;
  std::size_t i = begin;
  while (i < end) {
    char c = text[i];
    std::size_t start = i;
    if (is_ws(c)) {
      while (i < end && is_ws(text[i])) ++i;
      atoms.push_back({start, i, AtomKind::Ws, false});
    } else if (is_digit(c)) {
      ++i;
      while (i < end && (is_ident(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
      atoms.push_back({start, i, AtomKind::Num, false});
    } else if (is_ident(static_cast<unsigned char>(c))) {
      while (i < end && is_ident(static_cast<unsigned char>(text[i]))) ++i;
      atoms.push_back({start, i, AtomKind::Code, true});
    } else {
      while (i < end && !is_ws(text[i]) && !is_ident(static_cast<unsigned char>(text[i]))) ++i;
      atoms.push_back({start, i, AtomKind::Code, false});
    }
  }
  return atoms;
}

// Groups atoms into spans. A single blank between two non-whitespace atoms is
// absorbed into the surrounding group; a group with no identifier atom but at
// least one number atom becomes a NumericLiteral span.
void emit_plain_spans(std::string_view text, std::size_t begin, std::size_t end,
                      std::vector<Span>& out) {
  auto atoms = atomize(text, begin, end);
  std::vector<bool> glue(atoms.size(), false);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    glue[i] = atoms[i].kind == AtomKind::Ws && atoms[i].end - atoms[i].begin == 1 &&
              (text[atoms[i].begin] == ' ' || text[atoms[i].begin] == '\t') && i > 0 &&
              atoms[i - 1].kind != AtomKind::Ws && i + 1 < atoms.size() &&
              atoms[i + 1].kind != AtomKind::Ws;
  }
  std::size_t i = 0;
  while (i < atoms.size()) {
    if (atoms[i].kind == AtomKind::Ws && !glue[i]) {
      out.push_back({atoms[i].begin, atoms[i].end, TokenClass::Whitespace});
      ++i;
      continue;
    }
    std::size_t gb = atoms[i].begin;
    std::size_t ge = gb;
    bool has_ident = false, has_num = false;
    while (i < atoms.size() && (atoms[i].kind != AtomKind::Ws || glue[i])) {
      has_ident = has_ident || atoms[i].ident;
      has_num = has_num || atoms[i].kind == AtomKind::Num;
      ge = atoms[i].end;
      ++i;
    }
    TokenClass kind = (!has_ident && has_num) ? TokenClass::NumericLiteral : TokenClass::Code;
    out.push_back({gb, ge, kind});
  }
}

}  // namespace

std::vector<Span> classify(std::string_view text, const LanguageProfile& profile) {
  std::vector<Span> spans;
  for (const auto& region : scan_regions(text, profile)) {
    if (region.kind == TokenClass::Code) {
      emit_plain_spans(text, region.begin, region.end, spans);
    } else {
      spans.push_back({region.begin, region.end, region.kind});
    }
  }
  return spans;
}

namespace {

void token_split(std::string_view span_text, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < span_text.size()) {
    char c = span_text[i];
    if (is_ws(c)) {
      ++i;
      continue;
    }
    if (is_ident(static_cast<unsigned char>(c))) {
      std::size_t start = i;
      while (i < span_text.size() && is_ident(static_cast<unsigned char>(span_text[i]))) ++i;
      out.emplace_back(span_text.substr(start, i - start));
    } else {
      out.emplace_back(span_text.substr(i, 1));
      ++i;
    }
  }
}

enum class RunClass { Ws, Ident, Punct };

RunClass run_class(unsigned char c) {
  if (is_ws(static_cast<char>(c))) return RunClass::Ws;
  if (is_ident(c)) return RunClass::Ident;
  return RunClass::Punct;
}

// Subword segmentation: maximal same-class runs over code points, capped at
// kMaxSubwordLen code points per token. Tokens never exceed the cap, so
// count(t) >= ceil(len(t) / kMaxSubwordLen), and only the run touching a
// concatenation seam can change, so count(a+b) <= count(a) + count(b) + 1.
template <typename Emit>
void subword_scan(std::string_view text, Emit&& emit) {
  auto offs = codepoint_offsets(text);
  std::size_t n = offs.size() - 1;
  std::size_t i = 0;
  while (i < n) {
    RunClass cls = run_class(static_cast<unsigned char>(text[offs[i]]));
    std::size_t j = i + 1;
    while (j < n && run_class(static_cast<unsigned char>(text[offs[j]])) == cls) ++j;
    for (std::size_t b = i; b < j; b += kMaxSubwordLen) {
      std::size_t e = std::min(b + kMaxSubwordLen, j);
      emit(offs[b], offs[e]);
    }
    i = j;
  }
}

}  // namespace

std::vector<std::string> chunks(std::string_view text, Chunking chunking,
                                const LanguageProfile& profile) {
  std::vector<std::string> out;
  switch (chunking.granularity) {
    case Granularity::Line:
      return split_lines(text);
    case Granularity::Token: {
      for (const auto& span : classify(text, profile)) {
        if (span.kind == TokenClass::Code || span.kind == TokenClass::StringLiteral ||
            span.kind == TokenClass::NumericLiteral) {
          token_split(text.substr(span.begin, span.end - span.begin), out);
        }
      }
      return out;
    }
    case Granularity::Subword:
      subword_scan(text, [&](std::size_t b, std::size_t e) {
        out.emplace_back(text.substr(b, e - b));
      });
      return out;
    case Granularity::CharNGram: {
      if (chunking.ngram < 1) throw std::invalid_argument("CharNGram requires n >= 1");
      auto offs = codepoint_offsets(text);
      std::size_t n = offs.size() - 1;
      std::size_t k = static_cast<std::size_t>(chunking.ngram);
      if (n < k) return out;
      for (std::size_t i = 0; i + k <= n; ++i) {
        out.emplace_back(text.substr(offs[i], offs[i + k] - offs[i]));
      }
      return out;
    }
  }
  return out;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t count = 0;
  subword_scan(text, [&](std::size_t, std::size_t) { ++count; });
  return count;
}

namespace {

std::vector<std::size_t> brace_boundaries(std::string_view text, const LanguageProfile& p,
                                          const std::vector<Span>& spans) {
  std::vector<std::size_t> out;
  for (const auto& span : spans) {
    if (span.kind != TokenClass::Code && span.kind != TokenClass::NumericLiteral) continue;
    std::string_view body = text.substr(span.begin, span.end - span.begin);
    for (const auto& [open, close] : p.blocks) {
      for (std::size_t pos = body.find(open); pos != std::string_view::npos;
           pos = body.find(open, pos + 1)) {
        out.push_back(span.begin + pos + open.size());
      }
      for (std::size_t pos = body.find(close); pos != std::string_view::npos;
           pos = body.find(close, pos + 1)) {
        out.push_back(span.begin + pos);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> indent_boundaries(std::string_view text,
                                           const std::vector<Span>& spans) {
  std::vector<std::size_t> out;
  std::size_t cursor = 0;  // spans are ordered; lines are visited in order
  auto span_at = [&](std::size_t pos) -> const Span* {
    while (cursor < spans.size() && spans[cursor].end <= pos) ++cursor;
    if (cursor < spans.size() && spans[cursor].begin <= pos) return &spans[cursor];
    return nullptr;
  };
  long prev_indent = -1, first_indent = -1, last_indent = -1;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t nl = text.find('\n', line_start);
    std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
    std::size_t fc = line_start;
    while (fc < line_end && (text[fc] == ' ' || text[fc] == '\t')) ++fc;
    bool significant = fc < line_end;
    if (significant) {
      const Span* s = span_at(fc);
      if (s && s->kind == TokenClass::Comment) significant = false;
      // Continuation of a multi-line string started earlier: not a code line.
      if (s && s->kind == TokenClass::StringLiteral && s->begin < line_start) significant = false;
    }
    if (significant) {
      long indent = static_cast<long>(fc - line_start);
      if (first_indent < 0) first_indent = indent;
      if (prev_indent >= 0 && indent != prev_indent) out.push_back(line_start);
      prev_indent = indent;
      last_indent = indent;
    }
    if (nl == std::string_view::npos) break;
    line_start = nl + 1;
  }
  if (last_indent > first_indent && first_indent >= 0) out.push_back(text.size());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<std::size_t> block_boundaries(std::string_view text, const LanguageProfile& profile) {
  auto spans = classify(text, profile);
  if (profile.indent_based) return indent_boundaries(text, spans);
  return brace_boundaries(text, profile, spans);
}

namespace {

LanguageProfile make_profile(std::string id, std::vector<std::string> line_comments,
                             std::vector<std::pair<std::string, std::string>> block_comments,
                             std::vector<StringRule> strings,
                             std::vector<std::pair<std::string, std::string>> blocks,
                             bool indent_based) {
  LanguageProfile p;
  p.id = std::move(id);
  p.line_comments = std::move(line_comments);
  p.block_comments = std::move(block_comments);
  p.strings = std::move(strings);
  p.blocks = std::move(blocks);
  p.indent_based = indent_based;
  p.validate();
  return p;
}

const std::map<std::string, LanguageProfile>& builtin_profiles() {
  static const std::map<std::string, LanguageProfile> profiles = [] {
    std::map<std::string, LanguageProfile> m;
    auto add = [&m](LanguageProfile p) { m.emplace(p.id, std::move(p)); };
    std::vector<std::pair<std::string, std::string>> c_comments = {{"/*", "*/"}};
    std::vector<std::pair<std::string, std::string>> braces = {{"{", "}"}};
    add(make_profile("python", {"#"}, {}, {{"\"", true}, {"'", true}}, {}, true));
    add(make_profile("java", {"//"}, c_comments, {{"\"", true}, {"'", true}}, braces, false));
    add(make_profile("kotlin", {"//"}, c_comments, {{"\"", true}, {"'", true}}, braces, false));
    add(make_profile("javascript", {"//"}, c_comments,
                     {{"\"", true}, {"'", true}, {"`", true}}, braces, false));
    add(make_profile("cpp", {"//"}, c_comments, {{"\"", true}, {"'", true}}, braces, false));
    add(make_profile("csharp", {"//"}, c_comments, {{"\"", true}, {"'", true}}, braces, false));
    add(make_profile("go", {"//"}, c_comments, {{"\"", true}, {"'", true}, {"`", false}},
                     braces, false));
    add(make_profile("php", {"//", "#"}, c_comments, {{"\"", true}, {"'", true}}, braces,
                     false));
    // Single quotes double as lifetimes in Rust; leaving them out keeps the
    // lexer from eating the rest of the file after `&'a`.
    add(make_profile("rust", {"//"}, c_comments, {{"\"", true}}, braces, false));
    return m;
  }();
  return profiles;
}

}  // namespace

const LanguageProfile& builtin_profile(std::string_view language) {
  const auto& m = builtin_profiles();
  auto it = m.find(std::string(language));
  if (it == m.end()) {
    throw std::invalid_argument("unknown language id: " + std::string(language));
  }
  return it->second;
}

std::vector<std::string> builtin_languages() {
  std::vector<std::string> out;
  for (const auto& [id, _] : builtin_profiles()) out.push_back(id);
  return out;
}

std::map<std::string, LanguageProfile> load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::map<std::string, LanguageProfile> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const nlohmann::json& v = it.value();
    LanguageProfile p;
    p.id = it.key();
    for (const auto& m : v.value("line_comment", nlohmann::json::array())) {
      p.line_comments.push_back(m.get<std::string>());
    }
    for (const auto& bc : v.value("block_comment", nlohmann::json::array())) {
      p.block_comments.emplace_back(bc.at(0).get<std::string>(), bc.at(1).get<std::string>());
    }
    for (const auto& s : v.value("strings", nlohmann::json::array())) {
      if (s.is_string()) {
        p.strings.push_back({s.get<std::string>(), true});
      } else {
        p.strings.push_back({s.at("delim").get<std::string>(), s.value("escape", true)});
      }
    }
    for (const auto& b : v.value("blocks", nlohmann::json::array())) {
      p.blocks.emplace_back(b.at(0).get<std::string>(), b.at(1).get<std::string>());
    }
    p.indent_based = v.value("indent_based", false);
    p.validate();
    out.emplace(p.id, std::move(p));
  }
  return out;
}

const LanguageProfile& resolve_profile(const std::map<std::string, LanguageProfile>& extra,
                                       std::string_view language) {
  auto it = extra.find(std::string(language));
  if (it != extra.end()) return it->second;
  return builtin_profile(language);
}

std::string language_for_extension(std::string_view ext) {
  static const std::map<std::string, std::string, std::less<>> m = {
      {"py", "python"},   {"java", "java"}, {"kt", "kotlin"},  {"kts", "kotlin"},
      {"js", "javascript"}, {"jsx", "javascript"}, {"ts", "javascript"},
      {"tsx", "javascript"}, {"cpp", "cpp"}, {"cc", "cpp"},    {"cxx", "cpp"},
      {"hpp", "cpp"},     {"hh", "cpp"},    {"h", "cpp"},      {"cs", "csharp"},
      {"go", "go"},       {"php", "php"},   {"rs", "rust"},
  };
  auto it = m.find(ext);
  return it == m.end() ? std::string() : it->second;
}

}  // namespace fimkit::lex
