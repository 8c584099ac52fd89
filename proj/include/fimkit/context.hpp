#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fimkit/lexer.hpp"
#include "fimkit/similarity.hpp"

namespace fimkit::ctx {

// Immutable view of one repository tree. Paths are relative, '/'-separated,
// normalized and unique.
struct RepoSnapshot {
  std::string name;
  std::string root;
  std::map<std::string, std::string> files;          // path -> text
  std::map<std::string, std::string> meta;           // topic, stars, age, ...

  struct LoadOptions {
    std::size_t max_file_bytes = 1 << 20;  // larger files are skipped
    bool skip_binary = true;               // NUL byte in the first 8 KiB
  };

  // Loads every regular file under `dir`. Reads repo_meta.json at the root
  // into `meta` when present (and excludes it from `files`).
  static RepoSnapshot load(const std::string& dir);
  static RepoSnapshot load(const std::string& dir, const LoadOptions& options);

  const std::string& text_of(const std::string& path) const;  // throws on miss
  bool contains(const std::string& path) const { return files.count(path) != 0; }
};

struct ContextChunk {
  std::string path;
  int start_line = 1;  // 1-based, inclusive
  int end_line = 1;
  std::string text;    // exactly the referenced lines
  double score = 0.0;
};

struct CursorQuery {
  std::string path;
  std::size_t cursor_offset = 0;  // in characters (code points)
  std::string window_text;        // line window around the cursor
};

// Chunks ordered by non-increasing score; ties by (path, start_line). Chunks
// from the same file never overlap.
struct ContextBundle {
  std::string strategy;
  CursorQuery query;
  std::vector<ContextChunk> chunks;
};

// `window` lines centered on the cursor line, clamped at the file edges.
CursorQuery make_cursor_query(const RepoSnapshot& repo, const std::string& path,
                              std::size_t cursor_offset, std::size_t window);

// Edges between the two files' directories in the directory tree.
// Throws std::invalid_argument when either path is not in the repo.
int path_distance(const RepoSnapshot& repo, const std::string& from, const std::string& to);

// Whole sibling files of the query file ranked by line IoU against the query
// file's text; top k become one whole-file chunk each.
ContextBundle strategy_iou(const RepoSnapshot& repo, const CursorQuery& query, std::size_t k);

// Every other file ordered by (path_distance, path), truncated to max_files.
std::vector<std::string> strategy_path_distance(const RepoSnapshot& repo,
                                                const CursorQuery& query,
                                                std::size_t max_files);

struct RagParams {
  std::size_t window = 20;
  std::size_t stride = 10;
  std::size_t k = 16;
  std::size_t max_files = 64;
  std::vector<std::string> recent;  // extra candidates, tried ahead of BFS
};

// Precomputed per-file window chunk sets, so many queries against one
// snapshot do not re-chunk the same windows. Scores are identical to the
// direct path.
class RagIndex {
 public:
  struct Window {
    int start_line;
    int end_line;
    sim::ChunkSet chunks;
  };

  RagIndex(const RepoSnapshot& repo, std::size_t window, std::size_t stride);

  std::size_t window_size() const { return window_; }
  std::size_t stride() const { return stride_; }
  const std::vector<Window>& windows_of(const std::string& path) const;

 private:
  std::size_t window_;
  std::size_t stride_;
  std::map<std::string, std::vector<Window>> by_path_;
};

// Sliding line windows over candidate files scored by subword IoU against
// the cursor window; global top-k, overlapping picks from one file merged.
ContextBundle strategy_rag(const RepoSnapshot& repo, const CursorQuery& query,
                           const RagParams& params);

// Same strategy backed by the index. Throws std::invalid_argument when the
// index was built with different window/stride parameters.
ContextBundle strategy_rag(const RepoSnapshot& repo, const CursorQuery& query,
                           const RagParams& params, const RagIndex& index);

// Path-distance candidates wrapped as whole-file chunks with 1/(1+distance)
// scores, so all strategies can be emitted uniformly as bundles.
ContextBundle strategy_path_distance_bundle(const RepoSnapshot& repo, const CursorQuery& query,
                                            std::size_t max_files);

nlohmann::json to_json(const ContextBundle& bundle);
ContextBundle bundle_from_json(const nlohmann::json& j);

}  // namespace fimkit::ctx
