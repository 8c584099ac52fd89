#include "fimkit/context.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fimkit/similarity.hpp"
#include "fimkit/util.hpp"

namespace fs = std::filesystem;

namespace fimkit::ctx {

namespace {

bool looks_binary(std::string_view text) {
  std::size_t probe = std::min<std::size_t>(text.size(), 8192);
  return text.substr(0, probe).find('\0') != std::string_view::npos;
}

std::string normalize_path(const fs::path& rel) {
  std::string s = rel.lexically_normal().generic_string();
  if (s.rfind("./", 0) == 0) s = s.substr(2);
  return s;
}

std::vector<std::string> dir_components(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  std::size_t last_sep = path.rfind('/');
  if (last_sep == std::string_view::npos) return parts;  // repo root
  std::string_view dirs = path.substr(0, last_sep);
  while (start <= dirs.size()) {
    std::size_t sep = dirs.find('/', start);
    if (sep == std::string_view::npos) {
      parts.emplace_back(dirs.substr(start));
      break;
    }
    parts.emplace_back(dirs.substr(start, sep - start));
    start = sep + 1;
  }
  return parts;
}

std::string dirname_of(std::string_view path) {
  std::size_t sep = path.rfind('/');
  return sep == std::string_view::npos ? std::string() : std::string(path.substr(0, sep));
}

}  // namespace

RepoSnapshot RepoSnapshot::load(const std::string& dir) { return load(dir, LoadOptions{}); }

RepoSnapshot RepoSnapshot::load(const std::string& dir, const LoadOptions& options) {
  RepoSnapshot snap;
  fs::path root(dir);
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + dir);
  snap.root = root.generic_string();
  snap.name = root.filename().generic_string();
  if (snap.name.empty()) snap.name = root.parent_path().filename().generic_string();
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    std::error_code ec;
    auto size = it->file_size(ec);
    if (ec || size > options.max_file_bytes) continue;
    std::ifstream in(it->path(), std::ios::binary);
    if (!in) continue;
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = std::move(buf).str();
    if (options.skip_binary && looks_binary(text)) continue;
    std::string rel = normalize_path(fs::relative(it->path(), root));
    if (rel == "repo_meta.json") {
      try {
        nlohmann::json j = nlohmann::json::parse(text);
        for (auto kv = j.begin(); kv != j.end(); ++kv) {
          snap.meta[kv.key()] =
              kv.value().is_string() ? kv.value().get<std::string>() : kv.value().dump();
        }
      } catch (const nlohmann::json::exception&) {
        // malformed metadata is ignored, the repo is still usable
      }
      continue;
    }
    snap.files.emplace(std::move(rel), std::move(text));
  }
  return snap;
}

const std::string& RepoSnapshot::text_of(const std::string& path) const {
  auto it = files.find(path);
  if (it == files.end()) throw std::invalid_argument("unknown path in repo: " + path);
  return it->second;
}

CursorQuery make_cursor_query(const RepoSnapshot& repo, const std::string& path,
                              std::size_t cursor_offset, std::size_t window) {
  const std::string& text = repo.text_of(path);
  auto offsets = codepoint_offsets(text);
  std::size_t cp_len = offsets.size() - 1;
  std::size_t cp = std::min(cursor_offset, cp_len);
  std::size_t byte_off = offsets[cp];
  std::size_t cursor_line = 0;  // 0-based
  for (std::size_t i = 0; i < byte_off; ++i) {
    if (text[i] == '\n') ++cursor_line;
  }
  auto lines = split_lines(text);
  CursorQuery q;
  q.path = path;
  q.cursor_offset = cursor_offset;
  if (lines.empty()) return q;
  std::size_t w = std::max<std::size_t>(window, 1);
  std::size_t start = 0;
  if (cursor_line > (w - 1) / 2) start = cursor_line - (w - 1) / 2;
  if (start + w > lines.size()) start = lines.size() > w ? lines.size() - w : 0;
  std::size_t end = std::min(start + w, lines.size());
  std::string joined;
  for (std::size_t i = start; i < end; ++i) {
    if (i > start) joined.push_back('\n');
    joined += lines[i];
  }
  q.window_text = std::move(joined);
  return q;
}

int path_distance(const RepoSnapshot& repo, const std::string& from, const std::string& to) {
  if (!repo.contains(from)) throw std::invalid_argument("unknown path in repo: " + from);
  if (!repo.contains(to)) throw std::invalid_argument("unknown path in repo: " + to);
  auto a = dir_components(from);
  auto b = dir_components(to);
  std::size_t common = 0;
  while (common < a.size() && common < b.size() && a[common] == b[common]) ++common;
  return static_cast<int>((a.size() - common) + (b.size() - common));
}

namespace {

void sort_bundle(std::vector<ContextChunk>& chunks) {
  std::sort(chunks.begin(), chunks.end(), [](const ContextChunk& a, const ContextChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.path != b.path) return a.path < b.path;
    return a.start_line < b.start_line;
  });
}

std::string join_lines(const std::vector<std::string>& lines, std::size_t start,
                       std::size_t end) {
  std::string out;
  for (std::size_t i = start; i < end; ++i) {
    if (i > start) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

}  // namespace

ContextBundle strategy_iou(const RepoSnapshot& repo, const CursorQuery& query, std::size_t k) {
  const std::string& query_text = repo.text_of(query.path);
  std::string dir = dirname_of(query.path);
  sim::ChunkSet query_lines(split_lines(query_text));
  std::vector<ContextChunk> scored;
  for (const auto& [path, text] : repo.files) {
    if (path == query.path || dirname_of(path) != dir) continue;
    sim::ChunkSet candidate(split_lines(text));
    ContextChunk chunk;
    chunk.path = path;
    chunk.start_line = 1;
    auto lines = split_lines(text);
    chunk.end_line = static_cast<int>(std::max<std::size_t>(lines.size(), 1));
    chunk.text = text;
    chunk.score = candidate.iou_with(query_lines);
    scored.push_back(std::move(chunk));
  }
  sort_bundle(scored);
  if (scored.size() > k) scored.resize(k);
  ContextBundle bundle;
  bundle.strategy = "iou";
  bundle.query = query;
  bundle.chunks = std::move(scored);
  return bundle;
}

std::vector<std::string> strategy_path_distance(const RepoSnapshot& repo,
                                                const CursorQuery& query,
                                                std::size_t max_files) {
  if (!repo.contains(query.path)) throw std::invalid_argument("unknown path in repo: " + query.path);
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [path, text] : repo.files) {
    if (path == query.path) continue;
    ranked.emplace_back(path_distance(repo, query.path, path), path);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (const auto& [dist, path] : ranked) {
    if (out.size() >= max_files) break;
    out.push_back(path);
  }
  return out;
}

ContextBundle strategy_path_distance_bundle(const RepoSnapshot& repo, const CursorQuery& query,
                                            std::size_t max_files) {
  ContextBundle bundle;
  bundle.strategy = "path";
  bundle.query = query;
  for (const auto& path : strategy_path_distance(repo, query, max_files)) {
    const std::string& text = repo.text_of(path);
    ContextChunk chunk;
    chunk.path = path;
    chunk.start_line = 1;
    auto lines = split_lines(text);
    chunk.end_line = static_cast<int>(std::max<std::size_t>(lines.size(), 1));
    chunk.text = text;
    chunk.score = 1.0 / (1.0 + path_distance(repo, query.path, path));
    bundle.chunks.push_back(std::move(chunk));
  }
  sort_bundle(bundle.chunks);
  return bundle;
}

namespace {

sim::ChunkSet subword_set(std::string_view text) {
  return sim::ChunkSet(
      lex::chunks(text, lex::Chunking::subword(), lex::builtin_profile("python")));
}

std::vector<RagIndex::Window> windows_for(const std::string& text, std::size_t window,
                                          std::size_t stride) {
  std::vector<RagIndex::Window> out;
  auto lines = split_lines(text);
  for (std::size_t start = 0; start < lines.size(); start += stride) {
    std::size_t end = std::min(start + window, lines.size());
    out.push_back({static_cast<int>(start + 1), static_cast<int>(end),
                   subword_set(join_lines(lines, start, end))});
    if (end == lines.size()) break;
  }
  return out;
}

void validate_rag_params(const RagParams& params) {
  if (params.window < 1) throw std::invalid_argument("rag: window must be >= 1");
  if (params.stride < 1 || params.stride > params.window) {
    throw std::invalid_argument("rag: stride must be in [1, window]");
  }
}

ContextBundle rag_core(const RepoSnapshot& repo, const CursorQuery& query,
                       const RagParams& params, const RagIndex* index) {
  validate_rag_params(params);
  // Recent files come first (distance -1 in spirit), then BFS order.
  std::vector<std::string> candidates;
  auto push_candidate = [&](const std::string& path) {
    if (path == query.path || !repo.contains(path)) return;
    if (std::find(candidates.begin(), candidates.end(), path) != candidates.end()) return;
    if (candidates.size() < params.max_files) candidates.push_back(path);
  };
  for (const auto& path : params.recent) push_candidate(path);
  for (const auto& path : strategy_path_distance(repo, query, params.max_files)) {
    push_candidate(path);
  }

  sim::ChunkSet query_set = subword_set(query.window_text);
  std::vector<ContextChunk> scored;
  for (const auto& path : candidates) {
    std::vector<RagIndex::Window> local;
    const std::vector<RagIndex::Window>* windows;
    if (index) {
      windows = &index->windows_of(path);
    } else {
      local = windows_for(repo.text_of(path), params.window, params.stride);
      windows = &local;
    }
    for (const auto& w : *windows) {
      ContextChunk chunk;
      chunk.path = path;
      chunk.start_line = w.start_line;
      chunk.end_line = w.end_line;
      chunk.score = w.chunks.iou_with(query_set);
      scored.push_back(std::move(chunk));
    }
  }
  sort_bundle(scored);
  if (scored.size() > params.k) scored.resize(params.k);

  // Merge overlapping picks per file, keeping the best score.
  std::stable_sort(scored.begin(), scored.end(), [](const ContextChunk& a, const ContextChunk& b) {
    if (a.path != b.path) return a.path < b.path;
    return a.start_line < b.start_line;
  });
  std::vector<ContextChunk> merged;
  for (auto& chunk : scored) {
    if (!merged.empty() && merged.back().path == chunk.path &&
        chunk.start_line <= merged.back().end_line) {
      merged.back().end_line = std::max(merged.back().end_line, chunk.end_line);
      merged.back().score = std::max(merged.back().score, chunk.score);
      continue;
    }
    merged.push_back(std::move(chunk));
  }
  for (auto& chunk : merged) {
    auto lines = split_lines(repo.text_of(chunk.path));
    chunk.text = join_lines(lines, static_cast<std::size_t>(chunk.start_line - 1),
                            static_cast<std::size_t>(chunk.end_line));
  }
  sort_bundle(merged);
  ContextBundle bundle;
  bundle.strategy = "rag";
  bundle.query = query;
  bundle.chunks = std::move(merged);
  return bundle;
}

}  // namespace

RagIndex::RagIndex(const RepoSnapshot& repo, std::size_t window, std::size_t stride)
    : window_(window), stride_(stride) {
  RagParams check;
  check.window = window;
  check.stride = stride;
  validate_rag_params(check);
  for (const auto& [path, text] : repo.files) {
    by_path_.emplace(path, windows_for(text, window, stride));
  }
}

const std::vector<RagIndex::Window>& RagIndex::windows_of(const std::string& path) const {
  static const std::vector<Window> empty;
  auto it = by_path_.find(path);
  return it == by_path_.end() ? empty : it->second;
}

ContextBundle strategy_rag(const RepoSnapshot& repo, const CursorQuery& query,
                           const RagParams& params) {
  return rag_core(repo, query, params, nullptr);
}

ContextBundle strategy_rag(const RepoSnapshot& repo, const CursorQuery& query,
                           const RagParams& params, const RagIndex& index) {
  if (index.window_size() != params.window || index.stride() != params.stride) {
    throw std::invalid_argument("rag: index was built with different window/stride");
  }
  return rag_core(repo, query, params, &index);
}

nlohmann::json to_json(const ContextBundle& bundle) {
  nlohmann::json chunks = nlohmann::json::array();
  for (const auto& c : bundle.chunks) {
    chunks.push_back({{"path", c.path},
                      {"start_line", c.start_line},
                      {"end_line", c.end_line},
                      {"text", c.text},
                      {"score", c.score}});
  }
  return {{"strategy", bundle.strategy},
          {"query",
           {{"file", bundle.query.path},
            {"cursor", bundle.query.cursor_offset},
            {"window_text", bundle.query.window_text}}},
          {"chunks", chunks}};
}

ContextBundle bundle_from_json(const nlohmann::json& j) {
  ContextBundle bundle;
  bundle.strategy = j.value("strategy", std::string{});
  if (j.contains("query")) {
    const auto& q = j.at("query");
    bundle.query.path = q.value("file", std::string{});
    bundle.query.cursor_offset = q.value("cursor", std::size_t{0});
    bundle.query.window_text = q.value("window_text", std::string{});
  }
  for (const auto& c : j.value("chunks", nlohmann::json::array())) {
    ContextChunk chunk;
    chunk.path = c.at("path").get<std::string>();
    chunk.start_line = c.at("start_line").get<int>();
    chunk.end_line = c.at("end_line").get<int>();
    chunk.text = c.at("text").get<std::string>();
    chunk.score = c.at("score").get<double>();
    bundle.chunks.push_back(std::move(chunk));
  }
  sort_bundle(bundle.chunks);  // re-establish the ordering invariant on load
  return bundle;
}

}  // namespace fimkit::ctx
