#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "fimkit/context.hpp"
#include "fimkit/similarity.hpp"
#include "fimkit/util.hpp"

using namespace fimkit;
using namespace fimkit::ctx;

namespace {

RepoSnapshot make_repo(std::vector<std::pair<std::string, std::string>> files) {
  RepoSnapshot repo;
  repo.name = "fixture";
  repo.root = "/fixture";
  for (auto& [path, text] : files) repo.files.emplace(std::move(path), std::move(text));
  return repo;
}

}  // namespace

TEST_CASE("path_distance: spec fixtures") {
  auto repo = make_repo({{"a/x.py", "x"},
                         {"a/y.py", "y"},
                         {"a/b/y.py", "y"},
                         {"a/b/x.py", "x"},
                         {"a/c/y.py", "y"},
                         {"root.py", "r"}});
  CHECK(path_distance(repo, "a/x.py", "a/y.py") == 0);
  CHECK(path_distance(repo, "a/x.py", "a/b/y.py") == 1);
  CHECK(path_distance(repo, "a/b/x.py", "a/c/y.py") == 2);
  CHECK(path_distance(repo, "root.py", "a/x.py") == 1);
  CHECK(path_distance(repo, "a/x.py", "a/x.py") == 0);
  CHECK_THROWS_AS(path_distance(repo, "a/x.py", "missing.py"), std::invalid_argument);
}

TEST_CASE("strategy_iou: sibling selection and ordering") {
  std::string query_text = "alpha\nbeta\ngamma\ndelta\n";
  auto repo = make_repo({
      {"pkg/query.py", query_text},
      {"pkg/identical.py", query_text},
      {"pkg/disjoint.py", "one\ntwo\n"},
      {"pkg/half.py", "alpha\nbeta\nx\ny\nz\nw\n"},       // 2 shared / 8 union
      {"other/far.py", query_text},                        // different directory
  });
  CursorQuery q;
  q.path = "pkg/query.py";
  auto bundle = strategy_iou(repo, q, 10);
  REQUIRE(bundle.chunks.size() == 3);
  CHECK(bundle.chunks[0].path == "pkg/identical.py");
  CHECK(bundle.chunks[0].score == doctest::Approx(1.0));
  CHECK(bundle.chunks[1].path == "pkg/half.py");
  CHECK(bundle.chunks[1].score == doctest::Approx(2.0 / 8.0));
  CHECK(bundle.chunks[2].path == "pkg/disjoint.py");
  CHECK(bundle.chunks[2].score == doctest::Approx(0.0));
  // whole files as chunks
  CHECK(bundle.chunks[0].start_line == 1);
  CHECK(bundle.chunks[0].text == query_text);

  // single file in its directory -> empty bundle
  auto lonely = make_repo({{"only.py", "x"}});
  CursorQuery lq;
  lq.path = "only.py";
  CHECK(strategy_iou(lonely, lq, 4).chunks.empty());
}

TEST_CASE("strategy_iou: hand-built overlaps order by exact IoU") {
  // 2/4, 1/5, 3/3 against the query's three lines
  auto repo = make_repo({
      {"d/q.py", "l1\nl2\nl3\n"},
      {"d/a.py", "l1\nl2\nn1\n"},        // inter 2, union 4 -> 0.5
      {"d/b.py", "l1\nm1\nm2\n"},          // inter 1, union 5 -> 0.2
      {"d/c.py", "l1\nl2\nl3\n"},        // inter 3, union 3 -> 1.0
  });
  CursorQuery q;
  q.path = "d/q.py";
  auto bundle = strategy_iou(repo, q, 3);
  REQUIRE(bundle.chunks.size() == 3);
  CHECK(bundle.chunks[0].path == "d/c.py");
  CHECK(bundle.chunks[0].score == doctest::Approx(1.0));
  CHECK(bundle.chunks[1].path == "d/a.py");
  CHECK(bundle.chunks[1].score == doctest::Approx(0.5));
  CHECK(bundle.chunks[2].path == "d/b.py");
  CHECK(bundle.chunks[2].score == doctest::Approx(0.2));
}

TEST_CASE("strategy_path_distance: BFS order with lexicographic ties") {
  auto repo = make_repo({
      {"a/q.py", "q"},
      {"a/near1.py", "n"},
      {"a/near2.py", "n"},
      {"a/sub/mid.py", "m"},
      {"top.py", "t"},
      {"b/far.py", "f"},
  });
  CursorQuery q;
  q.path = "a/q.py";
  auto order = strategy_path_distance(repo, q, 100);
  REQUIRE(order.size() == 5);
  CHECK(order[0] == "a/near1.py");
  CHECK(order[1] == "a/near2.py");  // tie at distance 0, lexicographic
  // distance 1: a/sub/mid.py and top.py
  CHECK(order[2] == "a/sub/mid.py");
  CHECK(order[3] == "top.py");
  CHECK(order[4] == "b/far.py");  // distance 2
  // distances never decrease
  int prev = -1;
  for (const auto& path : order) {
    int d = path_distance(repo, q.path, path);
    CHECK(d >= prev);
    prev = d;
  }
  // truncation and single-file repo
  CHECK(strategy_path_distance(repo, q, 2).size() == 2);
  auto lonely = make_repo({{"only.py", "x"}});
  CursorQuery lq;
  lq.path = "only.py";
  CHECK(strategy_path_distance(lonely, lq, 10).empty());
}

TEST_CASE("make_cursor_query: centered window clamps at edges") {
  auto repo = make_repo({{"f.py", "l1\nl2\nl3\nl4\nl5\nl6\n"}});
  auto q1 = make_cursor_query(repo, "f.py", 0, 3);
  CHECK(q1.window_text == "l1\nl2\nl3");
  // cursor on l4 (offset of its first char = 9)
  auto q2 = make_cursor_query(repo, "f.py", 9, 3);
  CHECK(q2.window_text == "l3\nl4\nl5");
  auto q3 = make_cursor_query(repo, "f.py", 17, 3);  // last line
  CHECK(q3.window_text == "l4\nl5\nl6");
  auto q4 = make_cursor_query(repo, "f.py", 2, 100);  // window larger than file
  CHECK(q4.window_text == "l1\nl2\nl3\nl4\nl5\nl6");
}

TEST_CASE("strategy_rag: identity chunk wins; disjoint contributes nothing") {
  std::string shared = "def compute(x):\n    return x * 2\n";
  auto repo = make_repo({
      {"a/q.py", shared + "q = compute(3)\n"},
      {"a/same.py", shared},
      {"a/noise.py", "zzz\nqqq\n"},
  });
  RagParams params;
  params.window = 2;
  params.stride = 1;
  params.k = 1;
  auto q = make_cursor_query(repo, "a/q.py", 0, params.window);
  auto bundle = strategy_rag(repo, q, params);
  REQUIRE(bundle.chunks.size() == 1);
  CHECK(bundle.chunks[0].path == "a/same.py");
  CHECK(bundle.chunks[0].score == doctest::Approx(1.0));
}

TEST_CASE("strategy_rag: top-k equals brute force over all windows") {
  auto repo = make_repo({
      {"m/q.py", "target alpha beta\nsecond line here\n"},
      {"m/a.py", "target alpha beta\nunrelated\nmore text\nfiller here\n"},
      {"m/b.py", "nothing shared\nat all here\ntarget alpha beta\nsecond line here\n"},
      {"m/c.py", "alpha beta\nbeta alpha\ntarget\nalpha\n"},
  });
  RagParams params;
  params.window = 2;
  params.stride = 2;  // non-overlapping windows: merging cannot kick in
  params.k = 4;
  auto q = make_cursor_query(repo, "m/q.py", 0, params.window);

  // Brute force: enumerate the same windows, score with sim::iou, rank.
  struct Scored {
    double score;
    std::string path;
    int start;
    int end;
  };
  std::vector<Scored> all;
  for (const auto& [path, text] : repo.files) {
    if (path == "m/q.py") continue;
    auto lines = split_lines(text);
    for (std::size_t start = 0; start < lines.size(); start += params.stride) {
      std::size_t end = std::min(start + params.window, lines.size());
      std::string chunk;
      for (std::size_t i = start; i < end; ++i) {
        if (i > start) chunk.push_back('\n');
        chunk += lines[i];
      }
      all.push_back({sim::iou_subword(chunk, q.window_text), path,
                     static_cast<int>(start + 1), static_cast<int>(end)});
      if (end == lines.size()) break;
    }
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.path != b.path) return a.path < b.path;
    return a.start < b.start;
  });

  auto bundle = strategy_rag(repo, q, params);
  REQUIRE(bundle.chunks.size() == std::min<std::size_t>(params.k, all.size()));
  for (std::size_t i = 0; i < bundle.chunks.size(); ++i) {
    CHECK(bundle.chunks[i].path == all[i].path);
    CHECK(bundle.chunks[i].start_line == all[i].start);
    CHECK(bundle.chunks[i].score == doctest::Approx(all[i].score));
  }
}

TEST_CASE("strategy_rag: overlapping picks from one file merge") {
  std::string q_text = "shared one\nshared two\nshared three\n";
  auto repo = make_repo({
      {"q.py", q_text},
      {"big.py", "shared one\nshared two\nshared three\nshared one\nshared two\n"},
  });
  RagParams params;
  params.window = 3;
  params.stride = 1;  // heavy overlap
  params.k = 4;
  auto q = make_cursor_query(repo, "q.py", 0, params.window);
  auto bundle = strategy_rag(repo, q, params);
  // all selected chunks come from big.py and overlap; they must merge
  for (std::size_t i = 0; i < bundle.chunks.size(); ++i) {
    for (std::size_t j = i + 1; j < bundle.chunks.size(); ++j) {
      if (bundle.chunks[i].path != bundle.chunks[j].path) continue;
      bool disjoint = bundle.chunks[i].end_line < bundle.chunks[j].start_line ||
                      bundle.chunks[j].end_line < bundle.chunks[i].start_line;
      CHECK(disjoint);
    }
  }
  // chunk text equals the referenced lines
  for (const auto& c : bundle.chunks) {
    auto lines = split_lines(repo.files.at(c.path));
    std::string expect;
    for (int i = c.start_line; i <= c.end_line; ++i) {
      if (i > c.start_line) expect.push_back('\n');
      expect += lines[static_cast<std::size_t>(i - 1)];
    }
    CHECK(c.text == expect);
  }
}

TEST_CASE("strategy_rag: recent files join the candidate set") {
  // far.py is outside max_files range, but recent injection brings it in
  std::vector<std::pair<std::string, std::string>> files = {{"q.py", "needle match\n"}};
  for (int i = 0; i < 10; ++i) {
    files.emplace_back("pad" + std::to_string(i) + ".py", "nothing\n");
  }
  files.emplace_back("z/far.py", "needle match\n");
  auto repo = make_repo(std::move(files));
  RagParams params;
  params.window = 1;
  params.stride = 1;
  params.k = 2;
  params.max_files = 3;
  auto q = make_cursor_query(repo, "q.py", 0, params.window);

  auto without = strategy_rag(repo, q, params);
  bool far_in = std::any_of(without.chunks.begin(), without.chunks.end(),
                            [](const ContextChunk& c) { return c.path == "z/far.py"; });
  CHECK_FALSE(far_in);

  params.recent = {"z/far.py"};
  auto with = strategy_rag(repo, q, params);
  REQUIRE(!with.chunks.empty());
  CHECK(with.chunks[0].path == "z/far.py");
  CHECK(with.chunks[0].score == doctest::Approx(1.0));
}

TEST_CASE("strategy_rag: indexed path matches the direct path exactly") {
  auto repo = make_repo({
      {"m/q.py", "target alpha beta\nsecond line here\n"},
      {"m/a.py", "target alpha beta\nunrelated\nmore text\nfiller here\n"},
      {"m/b.py", "nothing shared\nat all here\ntarget alpha beta\nsecond line here\n"},
      {"n/c.py", "alpha beta\nbeta alpha\ntarget\nalpha\n"},
  });
  RagParams params;
  params.window = 2;
  params.stride = 1;
  params.k = 5;
  auto q = make_cursor_query(repo, "m/q.py", 0, params.window);
  RagIndex index(repo, params.window, params.stride);
  auto direct = strategy_rag(repo, q, params);
  auto indexed = strategy_rag(repo, q, params, index);
  REQUIRE(indexed.chunks.size() == direct.chunks.size());
  for (std::size_t i = 0; i < direct.chunks.size(); ++i) {
    CHECK(indexed.chunks[i].path == direct.chunks[i].path);
    CHECK(indexed.chunks[i].start_line == direct.chunks[i].start_line);
    CHECK(indexed.chunks[i].end_line == direct.chunks[i].end_line);
    CHECK(indexed.chunks[i].text == direct.chunks[i].text);
    CHECK(indexed.chunks[i].score == direct.chunks[i].score);
  }
  // parameter mismatch is rejected
  RagParams other = params;
  other.stride = 2;
  CHECK_THROWS_AS(strategy_rag(repo, q, other, index), std::invalid_argument);
}

TEST_CASE("strategy_rag: query file never appears; stride validation") {
  auto repo = make_repo({{"q.py", "a\nb\n"}, {"x.py", "a\nb\n"}});
  RagParams params;
  params.window = 2;
  params.stride = 1;
  auto q = make_cursor_query(repo, "q.py", 0, 2);
  auto bundle = strategy_rag(repo, q, params);
  for (const auto& c : bundle.chunks) CHECK(c.path != "q.py");
  params.stride = 5;
  CHECK_THROWS_AS(strategy_rag(repo, q, params), std::invalid_argument);
  params.stride = 0;
  CHECK_THROWS_AS(strategy_rag(repo, q, params), std::invalid_argument);
}

TEST_CASE("bundle ordering invariant holds across strategies") {
  auto repo = make_repo({
      {"p/q.py", "alpha\nbeta\n"},
      {"p/a.py", "alpha\nbeta\n"},
      {"p/b.py", "alpha\nx\n"},
      {"p/c.py", "y\nz\n"},
  });
  auto q = make_cursor_query(repo, "p/q.py", 0, 2);
  for (const auto& bundle :
       {strategy_iou(repo, q, 4), strategy_rag(repo, q, RagParams{2, 1, 4, 64, {}}),
        strategy_path_distance_bundle(repo, q, 64)}) {
    for (std::size_t i = 1; i < bundle.chunks.size(); ++i) {
      const auto& prev = bundle.chunks[i - 1];
      const auto& cur = bundle.chunks[i];
      bool ordered = prev.score > cur.score ||
                     (prev.score == cur.score &&
                      (prev.path < cur.path ||
                       (prev.path == cur.path && prev.start_line < cur.start_line)));
      CHECK(ordered);
    }
    for (const auto& c : bundle.chunks) {
      CHECK(c.path != "p/q.py");
      CHECK(c.score >= 0.0);
    }
  }
}

TEST_CASE("RepoSnapshot::load skips binaries and oversized files") {
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / "fimkit_snap_test";
  fs::remove_all(root);
  fs::create_directories(root / "sub");
  std::ofstream(root / "a.py") << "print(1)\n";
  std::ofstream(root / "sub" / "b.py") << "print(2)\n";
  {
    std::ofstream bin(root / "blob.bin", std::ios::binary);
    const char buf[] = {'x', '\0', 'y'};
    bin.write(buf, sizeof buf);
  }
  {
    std::ofstream big(root / "big.py");
    std::string filler(2 << 20, 'x');
    big << filler;
  }
  std::ofstream(root / "repo_meta.json") << R"({"topic": "demo", "stars": 42})";
  auto snap = RepoSnapshot::load(root.string());
  CHECK(snap.files.count("a.py") == 1);
  CHECK(snap.files.count("sub/b.py") == 1);
  CHECK(snap.files.count("blob.bin") == 0);
  CHECK(snap.files.count("big.py") == 0);
  CHECK(snap.files.count("repo_meta.json") == 0);
  CHECK(snap.meta.at("topic") == "demo");
  CHECK(snap.meta.at("stars") == "42");
  fs::remove_all(root);
}

TEST_CASE("bundle json round-trip") {
  auto repo = make_repo({{"p/q.py", "alpha\nbeta\n"}, {"p/a.py", "alpha\nbeta\n"}});
  auto q = make_cursor_query(repo, "p/q.py", 3, 2);
  auto bundle = strategy_iou(repo, q, 2);
  auto j = to_json(bundle);
  auto back = bundle_from_json(j);
  CHECK(back.strategy == bundle.strategy);
  CHECK(back.query.path == bundle.query.path);
  CHECK(back.query.cursor_offset == bundle.query.cursor_offset);
  REQUIRE(back.chunks.size() == bundle.chunks.size());
  for (std::size_t i = 0; i < back.chunks.size(); ++i) {
    CHECK(back.chunks[i].path == bundle.chunks[i].path);
    CHECK(back.chunks[i].text == bundle.chunks[i].text);
    CHECK(back.chunks[i].score == doctest::Approx(bundle.chunks[i].score));
  }
}
