#include "fimkit/similarity.hpp"

#include <algorithm>
#include <numeric>

#include "fimkit/util.hpp"

namespace fimkit::sim {

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::u32string ua = decode_utf8(a);
  std::u32string ub = decode_utf8(b);
  if (ua.size() < ub.size()) std::swap(ua, ub);
  const std::size_t n = ub.size();
  std::vector<std::size_t> row(n + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= ua.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      std::size_t sub = diag + (ua[i - 1] == ub[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
    }
  }
  return row[n];
}

double normalized_levenshtein_similarity(std::string_view a, std::string_view b) {
  std::size_t la = codepoint_count(a);
  std::size_t lb = codepoint_count(b);
  std::size_t longest = std::max(la, lb);
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

ChunkSet::ChunkSet(std::vector<std::string> chunks) : chunks_(std::move(chunks)) {
  std::sort(chunks_.begin(), chunks_.end());
  chunks_.erase(std::unique(chunks_.begin(), chunks_.end()), chunks_.end());
}

double ChunkSet::iou_with(const ChunkSet& other) const {
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < chunks_.size() && j < other.chunks_.size()) {
    int cmp = chunks_[i].compare(other.chunks_[j]);
    if (cmp == 0) {
      ++inter;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  std::size_t uni = chunks_.size() + other.chunks_.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(std::string_view x, std::string_view y, lex::Chunking chunking,
           const lex::LanguageProfile& profile) {
  ChunkSet cx(lex::chunks(x, chunking, profile));
  ChunkSet cy(lex::chunks(y, chunking, profile));
  return cx.iou_with(cy);
}

}  // namespace fimkit::sim
