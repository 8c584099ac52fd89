#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "fimkit/lexer.hpp"

namespace fimkit::sim {

// Levenshtein distance with unit costs over Unicode scalar values.
std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - dist / max(len(a), len(b)); 1.0 when both are empty.
double normalized_levenshtein_similarity(std::string_view a, std::string_view b);

// Jaccard similarity of the two chunk sets (duplicates collapse).
// Both chunk sets empty -> 0.
double iou(std::string_view x, std::string_view y, lex::Chunking chunking,
           const lex::LanguageProfile& profile);

// IoU over precomputed chunk multisets; used to score many candidates
// against one query without re-chunking the query.
class ChunkSet {
 public:
  ChunkSet() = default;
  explicit ChunkSet(std::vector<std::string> chunks);
  std::size_t size() const { return chunks_.size(); }
  double iou_with(const ChunkSet& other) const;

 private:
  std::vector<std::string> chunks_;  // sorted, unique
};

inline double iou_line(std::string_view x, std::string_view y) {
  return iou(x, y, lex::Chunking::line(), lex::builtin_profile("python"));
}

inline double iou_subword(std::string_view x, std::string_view y) {
  return iou(x, y, lex::Chunking::subword(), lex::builtin_profile("python"));
}

}  // namespace fimkit::sim
