#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fimkit/context.hpp"
#include "fimkit/lexer.hpp"

namespace fimkit::fim {

enum class Boundary { BlockBoundary, LineStart, LineMiddle, TokenMiddle };
enum class SplitStrategy { Random, ScopeAware };

const char* to_string(Boundary b);
const char* to_string(SplitStrategy s);
Boundary boundary_from_string(std::string_view s);
SplitStrategy strategy_from_string(std::string_view s);

struct SourceFile {
  std::string path;
  std::string text;
  std::string language;
  std::map<std::string, std::string> metadata;
};

// prefix + middle + suffix always reconstructs the source file byte-for-byte;
// middle is non-empty, and at most kMaxMiddleChars code points for ScopeAware.
struct FimExample {
  std::string path;
  std::string prefix;
  std::string middle;
  std::string suffix;
  Boundary boundary_start = Boundary::LineStart;
  Boundary boundary_end = Boundary::LineStart;
  SplitStrategy split_strategy = SplitStrategy::Random;
  std::string language;
  std::map<std::string, std::string> metadata;
};

inline constexpr std::size_t kMaxMiddleChars = 700;

// Sampling weights for the boundary type of scope-aware split points.
struct ScopeWeights {
  double block = 0.5;
  double line_start = 0.3;
  double line_middle = 0.15;
  double token_middle = 0.05;
};

// Boundary type of a split point, given the block positions the lexer found.
Boundary boundary_at(std::string_view text, std::size_t pos,
                     const std::vector<std::size_t>& block_positions);

// Two uniform cut points over character positions, sorted, redrawn until the
// middle is non-empty. Throws std::invalid_argument on an empty file.
FimExample split_random(const SourceFile& file, std::uint64_t seed);

// Start and end drawn over boundary-typed candidate positions; the end lies
// within kMaxMiddleChars characters of the start. Retries up to 16 times,
// then throws std::runtime_error (caller skips the file).
FimExample split_scope_aware(const SourceFile& file, const lex::LanguageProfile& profile,
                             std::uint64_t seed, const ScopeWeights& weights = {});

struct SentinelSet {
  std::string suffix_marker = "<|fim_suffix|>";
  std::string prefix_marker = "<|fim_prefix|>";
  std::string middle_marker = "<|fim_middle|>";

  // Markers must be non-empty and pairwise distinct.
  void validate() const;
};

struct RenderedPrompt {
  std::string text;
  std::size_t token_count = 0;
  std::size_t context_chunks_used = 0;
};

// S-P-M layout: [context][suffix marker][suffix][prefix marker][prefix]
// [middle marker]. Under budget pressure context chunks are dropped lowest
// score first, then the suffix loses its tail, then the prefix its head.
// Throws std::invalid_argument when a marker occurs in the example or the
// context, or when the budget cannot fit the markers plus one character of
// prefix and suffix.
RenderedPrompt render_prompt(const FimExample& example, const ctx::ContextBundle& context,
                             const SentinelSet& sentinels, std::size_t budget);

nlohmann::json to_json(const FimExample& example);
FimExample example_from_json(const nlohmann::json& j);

}  // namespace fimkit::fim
