#include "fimkit/fim.hpp"

#include <algorithm>
#include <stdexcept>

#include "fimkit/util.hpp"

namespace fimkit::fim {

const char* to_string(Boundary b) {
  switch (b) {
    case Boundary::BlockBoundary: return "block_boundary";
    case Boundary::LineStart: return "line_start";
    case Boundary::LineMiddle: return "line_middle";
    case Boundary::TokenMiddle: return "token_middle";
  }
  return "line_start";
}

const char* to_string(SplitStrategy s) {
  return s == SplitStrategy::Random ? "random" : "scope_aware";
}

Boundary boundary_from_string(std::string_view s) {
  if (s == "block_boundary") return Boundary::BlockBoundary;
  if (s == "line_start") return Boundary::LineStart;
  if (s == "line_middle") return Boundary::LineMiddle;
  if (s == "token_middle") return Boundary::TokenMiddle;
  throw std::invalid_argument("unknown boundary type: " + std::string(s));
}

SplitStrategy strategy_from_string(std::string_view s) {
  if (s == "random") return SplitStrategy::Random;
  if (s == "scope_aware") return SplitStrategy::ScopeAware;
  throw std::invalid_argument("unknown split strategy: " + std::string(s));
}

namespace {

bool ident_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c >= 0x80;
}

}  // namespace

Boundary boundary_at(std::string_view text, std::size_t pos,
                     const std::vector<std::size_t>& block_positions) {
  if (std::binary_search(block_positions.begin(), block_positions.end(), pos)) {
    return Boundary::BlockBoundary;
  }
  if (pos == 0 || text[pos - 1] == '\n') return Boundary::LineStart;
  if (pos < text.size() && ident_char(static_cast<unsigned char>(text[pos - 1])) &&
      ident_char(static_cast<unsigned char>(text[pos]))) {
    return Boundary::TokenMiddle;
  }
  return Boundary::LineMiddle;
}

FimExample split_random(const SourceFile& file, std::uint64_t seed) {
  if (file.text.empty()) throw std::invalid_argument("split_random: empty file " + file.path);
  auto offsets = codepoint_offsets(file.text);
  std::size_t cp_len = offsets.size() - 1;
  std::mt19937_64 rng(seed);
  std::size_t a = 0, b = 0;
  do {
    a = static_cast<std::size_t>(draw_below(rng, cp_len + 1));
    b = static_cast<std::size_t>(draw_below(rng, cp_len + 1));
  } while (a == b);
  if (a > b) std::swap(a, b);
  FimExample ex;
  ex.path = file.path;
  ex.language = file.language;
  ex.metadata = file.metadata;
  ex.prefix = file.text.substr(0, offsets[a]);
  ex.middle = file.text.substr(offsets[a], offsets[b] - offsets[a]);
  ex.suffix = file.text.substr(offsets[b]);
  static const std::vector<std::size_t> no_blocks;
  ex.boundary_start = boundary_at(file.text, offsets[a], no_blocks);
  ex.boundary_end = boundary_at(file.text, offsets[b], no_blocks);
  ex.split_strategy = SplitStrategy::Random;
  return ex;
}

FimExample split_scope_aware(const SourceFile& file, const lex::LanguageProfile& profile,
                             std::uint64_t seed, const ScopeWeights& weights) {
  if (file.text.empty()) {
    throw std::invalid_argument("split_scope_aware: empty file " + file.path);
  }
  auto offsets = codepoint_offsets(file.text);
  std::size_t cp_len = offsets.size() - 1;
  auto blocks = lex::block_boundaries(file.text, profile);

  // Candidate positions by boundary type, as code point indices.
  constexpr int kTypes = 4;
  std::vector<std::size_t> by_type[kTypes];
  for (std::size_t cp = 0; cp <= cp_len; ++cp) {
    Boundary b = boundary_at(file.text, offsets[cp], blocks);
    by_type[static_cast<int>(b)].push_back(cp);
  }
  const double weight_of[kTypes] = {weights.block, weights.line_start, weights.line_middle,
                                    weights.token_middle};

  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 16; ++attempt) {
    // Start: any candidate that leaves room for a non-empty middle.
    std::vector<double> w(kTypes, 0.0);
    std::vector<std::vector<std::size_t>> eligible(kTypes);
    for (int t = 0; t < kTypes; ++t) {
      for (std::size_t cp : by_type[t]) {
        if (cp + 1 <= cp_len) eligible[static_cast<std::size_t>(t)].push_back(cp);
      }
      if (!eligible[static_cast<std::size_t>(t)].empty()) w[static_cast<std::size_t>(t)] = weight_of[t];
    }
    std::size_t start_type;
    try {
      start_type = draw_weighted(rng, w);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("split_scope_aware: no start candidate under the given weights in " +
                               file.path);
    }
    std::size_t start =
        eligible[start_type][draw_below(rng, eligible[start_type].size())];

    // End: a candidate within the middle-length cap.
    std::size_t hi = std::min(start + kMaxMiddleChars, cp_len);
    std::vector<double> ew(kTypes, 0.0);
    std::vector<std::vector<std::size_t>> ends(kTypes);
    for (int t = 0; t < kTypes; ++t) {
      const auto& cands = by_type[t];
      auto lo_it = std::upper_bound(cands.begin(), cands.end(), start);
      auto hi_it = std::upper_bound(cands.begin(), cands.end(), hi);
      for (auto it = lo_it; it != hi_it; ++it) ends[static_cast<std::size_t>(t)].push_back(*it);
      if (!ends[static_cast<std::size_t>(t)].empty()) ew[static_cast<std::size_t>(t)] = weight_of[t];
    }
    std::size_t end_type;
    try {
      end_type = draw_weighted(rng, ew);
    } catch (const std::invalid_argument&) {
      continue;  // no admissible end for this start; retry
    }
    std::size_t end = ends[end_type][draw_below(rng, ends[end_type].size())];

    FimExample ex;
    ex.path = file.path;
    ex.language = file.language;
    ex.metadata = file.metadata;
    ex.prefix = file.text.substr(0, offsets[start]);
    ex.middle = file.text.substr(offsets[start], offsets[end] - offsets[start]);
    ex.suffix = file.text.substr(offsets[end]);
    ex.boundary_start = boundary_at(file.text, offsets[start], blocks);
    ex.boundary_end = boundary_at(file.text, offsets[end], blocks);
    ex.split_strategy = SplitStrategy::ScopeAware;
    return ex;
  }
  throw std::runtime_error("split_scope_aware: no admissible split found in " + file.path);
}

void SentinelSet::validate() const {
  if (suffix_marker.empty() || prefix_marker.empty() || middle_marker.empty()) {
    throw std::invalid_argument("sentinel markers must be non-empty");
  }
  if (suffix_marker == prefix_marker || suffix_marker == middle_marker ||
      prefix_marker == middle_marker) {
    throw std::invalid_argument("sentinel markers must be pairwise distinct");
  }
}

namespace {

void check_no_marker(std::string_view text, const SentinelSet& s, const char* where) {
  for (const std::string* m : {&s.suffix_marker, &s.prefix_marker, &s.middle_marker}) {
    if (text.find(*m) != std::string_view::npos) {
      throw std::invalid_argument(std::string("sentinel '") + *m + "' occurs in " + where);
    }
  }
}

std::string context_section(const ctx::ContextBundle& context, std::size_t chunks_used) {
  std::string out;
  for (std::size_t i = 0; i < chunks_used; ++i) {
    const auto& c = context.chunks[i];
    out += c.path;
    out += ':';
    out += std::to_string(c.start_line);
    out += '-';
    out += std::to_string(c.end_line);
    out += '\n';
    out += c.text;
    if (out.empty() || out.back() != '\n') out += '\n';
  }
  return out;
}

std::string assemble(std::string_view ctx_section, const SentinelSet& s, std::string_view suffix,
                     std::string_view prefix) {
  std::string out;
  out.reserve(ctx_section.size() + suffix.size() + prefix.size() + s.suffix_marker.size() +
              s.prefix_marker.size() + s.middle_marker.size());
  out += ctx_section;
  out += s.suffix_marker;
  out += suffix;
  out += s.prefix_marker;
  out += prefix;
  out += s.middle_marker;
  return out;
}

}  // namespace

RenderedPrompt render_prompt(const FimExample& example, const ctx::ContextBundle& context,
                             const SentinelSet& sentinels, std::size_t budget) {
  sentinels.validate();
  check_no_marker(example.prefix, sentinels, "the prefix");
  check_no_marker(example.middle, sentinels, "the middle");
  check_no_marker(example.suffix, sentinels, "the suffix");
  for (const auto& chunk : context.chunks) {
    check_no_marker(chunk.text, sentinels, "a context chunk");
  }

  auto suffix_offs = codepoint_offsets(example.suffix);
  auto prefix_offs = codepoint_offsets(example.prefix);
  std::size_t suffix_len = suffix_offs.size() - 1;
  std::size_t prefix_len = prefix_offs.size() - 1;
  std::size_t min_suffix = suffix_len == 0 ? 0 : 1;
  std::size_t min_prefix = prefix_len == 0 ? 0 : 1;

  auto suffix_keep = [&](std::size_t n) {
    return std::string_view(example.suffix).substr(0, suffix_offs[n]);
  };
  auto prefix_keep = [&](std::size_t n) {
    return std::string_view(example.prefix)
        .substr(prefix_offs[prefix_len - n]);
  };
  auto tokens = [&](std::string_view ctx_sec, std::size_t ns, std::size_t np) {
    return lex::count_tokens(assemble(ctx_sec, sentinels, suffix_keep(ns), prefix_keep(np)));
  };

  if (tokens("", min_suffix, min_prefix) > budget) {
    throw std::invalid_argument("render_prompt: budget " + std::to_string(budget) +
                                " cannot fit the sentinel markers plus minimal prefix/suffix");
  }

  // Context chunks are dropped lowest score first (bundle order is already
  // non-increasing score).
  std::size_t chunks_used = context.chunks.size();
  std::string ctx_sec = context_section(context, chunks_used);
  while (chunks_used > 0 && tokens(ctx_sec, suffix_len, prefix_len) > budget) {
    --chunks_used;
    ctx_sec = context_section(context, chunks_used);
  }
  if (chunks_used == 0) ctx_sec.clear();

  std::size_t keep_suffix = suffix_len;
  std::size_t keep_prefix = prefix_len;
  if (tokens(ctx_sec, keep_suffix, keep_prefix) > budget) {
    // Trim the far end of the suffix. Token counts grow with kept length, so
    // binary search for the largest fit.
    std::size_t lo = min_suffix, hi = suffix_len;
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo + 1) / 2;
      if (tokens(ctx_sec, mid, keep_prefix) <= budget) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    keep_suffix = lo;
  }
  if (tokens(ctx_sec, keep_suffix, keep_prefix) > budget) {
    // Still over: trim the far start of the prefix.
    std::size_t lo = min_prefix, hi = prefix_len;
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo + 1) / 2;
      if (tokens(ctx_sec, keep_suffix, mid) <= budget) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    keep_prefix = lo;
  }

  RenderedPrompt prompt;
  prompt.text = assemble(ctx_sec, sentinels, suffix_keep(keep_suffix), prefix_keep(keep_prefix));
  prompt.token_count = lex::count_tokens(prompt.text);
  prompt.context_chunks_used = chunks_used;
  return prompt;
}

nlohmann::json to_json(const FimExample& example) {
  return {{"path", example.path},
          {"prefix", example.prefix},
          {"middle", example.middle},
          {"suffix", example.suffix},
          {"boundary_start", to_string(example.boundary_start)},
          {"boundary_end", to_string(example.boundary_end)},
          {"split_strategy", to_string(example.split_strategy)},
          {"language", example.language},
          {"metadata", example.metadata}};
}

FimExample example_from_json(const nlohmann::json& j) {
  FimExample ex;
  ex.path = j.at("path").get<std::string>();
  ex.prefix = j.at("prefix").get<std::string>();
  ex.middle = j.at("middle").get<std::string>();
  ex.suffix = j.at("suffix").get<std::string>();
  ex.boundary_start = boundary_from_string(j.at("boundary_start").get<std::string>());
  ex.boundary_end = boundary_from_string(j.at("boundary_end").get<std::string>());
  ex.split_strategy = strategy_from_string(j.at("split_strategy").get<std::string>());
  ex.language = j.value("language", std::string{});
  if (j.contains("metadata")) {
    for (auto it = j.at("metadata").begin(); it != j.at("metadata").end(); ++it) {
      ex.metadata[it.key()] = it.value().get<std::string>();
    }
  }
  return ex;
}

}  // namespace fimkit::fim
