#include "fimkit/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fimkit/similarity.hpp"
#include "fimkit/util.hpp"

namespace fs = std::filesystem;

namespace fimkit::ds {

const char* to_string(FilterReason r) {
  switch (r) {
    case FilterReason::CommentDominated: return "comment_dominated";
    case FilterReason::LiteralDominated: return "literal_dominated";
    case FilterReason::WhitespaceDominated: return "whitespace_dominated";
    case FilterReason::JudgeRejected: return "judge_rejected";
  }
  return "judge_rejected";
}

FilterVerdict heuristic_filter(const fim::FimExample& example,
                               const lex::LanguageProfile& profile,
                               const FilterThresholds& thresholds) {
  FilterVerdict verdict;
  if (example.middle.empty()) return verdict;
  double comment = 0, literal = 0, whitespace = 0, total = 0;
  for (const auto& span : lex::classify(example.middle, profile)) {
    double mass = static_cast<double>(span.end - span.begin);
    total += mass;
    switch (span.kind) {
      case lex::TokenClass::Comment: comment += mass; break;
      case lex::TokenClass::StringLiteral:
      case lex::TokenClass::NumericLiteral: literal += mass; break;
      case lex::TokenClass::Whitespace: whitespace += mass; break;
      case lex::TokenClass::Code: break;
    }
  }
  if (total <= 0) return verdict;
  if (comment / total > thresholds.comment) verdict.reasons.push_back(FilterReason::CommentDominated);
  if (literal / total > thresholds.literal) verdict.reasons.push_back(FilterReason::LiteralDominated);
  if (whitespace / total > thresholds.whitespace) {
    verdict.reasons.push_back(FilterReason::WhitespaceDominated);
  }
  verdict.keep = verdict.reasons.empty();
  return verdict;
}

bool ScriptedJudge::accepts(const fim::FimExample& example) {
  auto it = verdicts_.find(example.path);
  if (it == verdicts_.end()) {
    throw JudgeTransportError("scripted judge has no verdict for " + example.path);
  }
  return it->second;
}

FilterVerdict judge_filter(const fim::FimExample& example, JudgeBackend& judge) {
  FilterVerdict verdict;
  if (!judge.accepts(example)) {
    verdict.reasons.push_back(FilterReason::JudgeRejected);
    verdict.keep = false;
  }
  return verdict;
}

namespace {

std::string meta_or(const fim::FimExample& ex, const std::string& key, const char* fallback) {
  auto it = ex.metadata.find(key);
  return it == ex.metadata.end() || it->second.empty() ? fallback : it->second;
}

}  // namespace

StratumKey stratum_of(const fim::FimExample& example) {
  StratumKey key;
  key.topic = meta_or(example, "topic", "unknown");
  key.age = meta_or(example, "age", "unknown");
  key.popularity = meta_or(example, "popularity", "unknown");
  key.role = meta_or(example, "role", "source");
  key.strategy = to_string(example.split_strategy);
  return key;
}

std::vector<fim::FimExample> stratified_sample(
    std::vector<fim::FimExample> pool, std::size_t quota, std::uint64_t seed,
    const std::function<StratumKey(const fim::FimExample&)>& key_fn) {
  if (quota > pool.size()) {
    throw std::invalid_argument("stratified_sample: quota " + std::to_string(quota) +
                                " exceeds pool size " + std::to_string(pool.size()));
  }
  if (quota == pool.size()) return pool;

  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < pool.size(); ++i) strata[key_fn(pool[i])].push_back(i);

  // Largest-remainder allocation.
  const double n = static_cast<double>(pool.size());
  struct Alloc {
    const StratumKey* key;
    std::size_t size;
    std::size_t count;
    double remainder;
  };
  std::vector<Alloc> allocs;
  std::size_t assigned = 0;
  for (const auto& [key, members] : strata) {
    double exact = static_cast<double>(quota) * static_cast<double>(members.size()) / n;
    std::size_t base = static_cast<std::size_t>(exact);
    allocs.push_back({&key, members.size(), base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::vector<std::size_t> order(allocs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (allocs[a].remainder != allocs[b].remainder) {
      return allocs[a].remainder > allocs[b].remainder;
    }
    return *allocs[a].key < *allocs[b].key;
  });
  for (std::size_t i = 0; assigned < quota; i = (i + 1) % order.size()) {
    Alloc& a = allocs[order[i]];
    if (a.count < a.size) {
      ++a.count;
      ++assigned;
    }
  }
  // Minimum coverage: every non-empty stratum gets one when quota allows.
  if (quota >= allocs.size()) {
    for (auto& a : allocs) {
      while (a.count == 0) {
        auto donor = std::max_element(allocs.begin(), allocs.end(),
                                      [](const Alloc& x, const Alloc& y) {
                                        if (x.count != y.count) return x.count < y.count;
                                        return *y.key < *x.key;  // stable donor choice
                                      });
        if (donor->count <= 1) break;  // nothing left to take
        --donor->count;
        ++a.count;
      }
    }
  }

  // Uniform in-stratum sampling via partial Fisher-Yates under the seed.
  std::vector<fim::FimExample> out;
  std::size_t stratum_idx = 0;
  for (const auto& [key, members] : strata) {
    Alloc& a = allocs[stratum_idx++];
    std::vector<std::size_t> idx = members;
    std::mt19937_64 rng(derive_seed(seed, key.topic + "|" + key.age + "|" + key.popularity +
                                              "|" + key.role + "|" + key.strategy));
    for (std::size_t i = 0; i < a.count && i < idx.size(); ++i) {
      std::size_t j = i + static_cast<std::size_t>(draw_below(rng, idx.size() - i));
      std::swap(idx[i], idx[j]);
      out.push_back(pool[idx[i]]);
    }
  }
  return out;
}

namespace {

std::string full_text(const fim::FimExample& ex) { return ex.prefix + ex.middle + ex.suffix; }

}  // namespace

BenchmarkDataset dedup_leakage(BenchmarkDataset dataset,
                               const std::vector<ctx::RepoSnapshot>& reference,
                               double threshold) {
  if (!(threshold > 0.0) || threshold > 1.0) {
    throw std::invalid_argument("dedup_leakage: threshold must be in (0, 1]");
  }
  std::vector<sim::ChunkSet> ref_sets;
  std::vector<std::string> ref_paths;
  std::vector<std::string> ref_repos;
  for (const auto& repo : reference) {
    ref_repos.push_back(repo.name);
    for (const auto& [path, text] : repo.files) {
      ref_paths.push_back(path);
      ref_sets.emplace_back(split_lines(text));
    }
  }
  std::vector<DatasetEntry> kept;
  std::vector<sim::ChunkSet> kept_sets;
  for (auto& entry : dataset.entries) {
    const std::string repo = meta_or(entry.example, "repo", "");
    bool drop = std::find(ref_repos.begin(), ref_repos.end(), repo) != ref_repos.end() ||
                std::find(ref_paths.begin(), ref_paths.end(), entry.example.path) != ref_paths.end();
    sim::ChunkSet own(split_lines(full_text(entry.example)));
    if (!drop) {
      for (const auto& rs : ref_sets) {
        if (own.iou_with(rs) >= threshold) {
          drop = true;
          break;
        }
      }
    }
    if (!drop) {
      for (const auto& ks : kept_sets) {
        if (own.iou_with(ks) >= threshold) {
          drop = true;
          break;
        }
      }
    }
    if (!drop) {
      kept.push_back(std::move(entry));
      kept_sets.push_back(std::move(own));
    }
  }
  dataset.entries = std::move(kept);
  return dataset;
}

BuildConfig BuildConfig::from_json(const nlohmann::json& j) {
  BuildConfig c;
  for (const auto& r : j.value("repos", nlohmann::json::array())) {
    RepoSpec spec;
    if (r.is_string()) {
      spec.path = r.get<std::string>();
    } else {
      spec.path = r.at("path").get<std::string>();
      spec.name = r.value("name", std::string{});
    }
    c.repos.push_back(std::move(spec));
  }
  for (const auto& l : j.value("languages", nlohmann::json::array())) {
    c.languages.push_back(l.get<std::string>());
  }
  c.quota = j.value("quota", std::size_t{0});
  c.judge = j.value("judge", std::string{"accept_all"});
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    c.thresholds.comment = t.value("comment", 0.5);
    c.thresholds.literal = t.value("literal", 0.5);
    c.thresholds.whitespace = t.value("whitespace", 0.5);
  }
  if (j.contains("dedup")) {
    const auto& d = j.at("dedup");
    c.dedup_threshold = d.value("threshold", 0.7);
    for (const auto& r : d.value("reference_repos", nlohmann::json::array())) {
      c.reference_repos.push_back(r.get<std::string>());
    }
  }
  if (j.contains("context")) {
    const auto& x = j.at("context");
    c.context_strategy = x.value("strategy", std::string{"rag"});
    c.rag.window = x.value("window", std::size_t{20});
    c.rag.stride = x.value("stride", std::size_t{10});
    c.rag.k = x.value("k", std::size_t{16});
    c.rag.max_files = x.value("max_files", std::size_t{64});
  }
  if (j.contains("scope_weights")) {
    const auto& w = j.at("scope_weights");
    c.scope_weights.block = w.value("block", 0.5);
    c.scope_weights.line_start = w.value("line_start", 0.3);
    c.scope_weights.line_middle = w.value("line_middle", 0.15);
    c.scope_weights.token_middle = w.value("token_middle", 0.05);
  }
  c.profiles_path = j.value("profiles", std::string{});
  return c;
}

nlohmann::json BuildConfig::to_json() const {
  nlohmann::json repo_list = nlohmann::json::array();
  for (const auto& r : repos) {
    repo_list.push_back({{"path", r.path}, {"name", r.name}});
  }
  return {{"repos", repo_list},
          {"languages", languages},
          {"quota", quota},
          {"judge", judge},
          {"thresholds",
           {{"comment", thresholds.comment},
            {"literal", thresholds.literal},
            {"whitespace", thresholds.whitespace}}},
          {"dedup", {{"threshold", dedup_threshold}, {"reference_repos", reference_repos}}},
          {"context",
           {{"strategy", context_strategy},
            {"window", rag.window},
            {"stride", rag.stride},
            {"k", rag.k},
            {"max_files", rag.max_files}}},
          {"scope_weights",
           {{"block", scope_weights.block},
            {"line_start", scope_weights.line_start},
            {"line_middle", scope_weights.line_middle},
            {"token_middle", scope_weights.token_middle}}},
          {"profiles", profiles_path}};
}

namespace {

std::string file_role(const std::string& path) {
  std::string lowered = path;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered.find("test") != std::string::npos) return "test";
  return "source";
}

std::string popularity_bucket(const std::string& stars_str) {
  if (stars_str.empty()) return "unknown";
  long stars = 0;
  try {
    stars = std::stol(stars_str);
  } catch (...) {
    return "unknown";
  }
  if (stars < 10) return "low";
  if (stars < 1000) return "mid";
  return "high";
}

std::string extension_of(const std::string& path) {
  std::size_t dot = path.rfind('.');
  std::size_t sep = path.rfind('/');
  if (dot == std::string::npos || (sep != std::string::npos && dot < sep)) return {};
  return path.substr(dot + 1);
}

}  // namespace

BenchmarkDataset build(const BuildConfig& config, std::uint64_t seed) {
  if (config.repos.empty()) throw std::invalid_argument("build: config names no repositories");
  std::map<std::string, lex::LanguageProfile> extra;
  if (!config.profiles_path.empty()) extra = lex::load_profiles(config.profiles_path);
  // Resolve every configured language up front so an unknown id fails fast.
  for (const auto& lang : config.languages) lex::resolve_profile(extra, lang);

  std::unique_ptr<JudgeBackend> judge;
  if (config.judge == "accept_all") {
    judge = std::make_unique<AcceptAllJudge>();
  } else if (config.judge == "reject_all") {
    judge = std::make_unique<RejectAllJudge>();
  } else {
    throw std::invalid_argument("build: unknown judge '" + config.judge + "'");
  }

  std::vector<std::pair<std::string, std::size_t>> stages;
  std::vector<ctx::RepoSnapshot> snapshots;
  for (const auto& spec : config.repos) {
    auto snap = ctx::RepoSnapshot::load(spec.path);
    if (!spec.name.empty()) snap.name = spec.name;
    snapshots.push_back(std::move(snap));
  }

  struct Candidate {
    const ctx::RepoSnapshot* repo;
    std::string path;
    std::string language;
  };
  std::vector<Candidate> files;
  for (const auto& snap : snapshots) {
    for (const auto& [path, text] : snap.files) {
      std::string lang = lex::language_for_extension(extension_of(path));
      if (lang.empty()) continue;
      if (!config.languages.empty() &&
          std::find(config.languages.begin(), config.languages.end(), lang) ==
              config.languages.end()) {
        continue;
      }
      if (text.empty()) continue;
      files.push_back({&snap, path, lang});
    }
  }
  stages.emplace_back("ingested_files", files.size());

  std::vector<fim::FimExample> pool;
  for (const auto& cand : files) {
    fim::SourceFile src;
    src.path = cand.path;
    src.text = cand.repo->files.at(cand.path);
    src.language = cand.language;
    src.metadata["repo"] = cand.repo->name;
    auto topic = cand.repo->meta.find("topic");
    src.metadata["topic"] = topic == cand.repo->meta.end() ? "unknown" : topic->second;
    auto age = cand.repo->meta.find("age");
    src.metadata["age"] = age == cand.repo->meta.end() ? "unknown" : age->second;
    auto stars = cand.repo->meta.find("stars");
    src.metadata["popularity"] =
        popularity_bucket(stars == cand.repo->meta.end() ? "" : stars->second);
    src.metadata["role"] = file_role(cand.path);
    const auto& profile = lex::resolve_profile(extra, cand.language);
    try {
      pool.push_back(fim::split_scope_aware(
          src, profile, derive_seed(seed, cand.repo->name + ":" + cand.path),
          config.scope_weights));
    } catch (const std::runtime_error&) {
      // no admissible split; skip the file
    }
  }
  stages.emplace_back("split_ok", pool.size());

  std::vector<fim::FimExample> after_heuristic;
  for (auto& ex : pool) {
    const auto& profile = lex::resolve_profile(extra, ex.language);
    if (heuristic_filter(ex, profile, config.thresholds).keep) {
      after_heuristic.push_back(std::move(ex));
    }
  }
  stages.emplace_back("heuristic_kept", after_heuristic.size());

  std::vector<fim::FimExample> after_judge;
  for (auto& ex : after_heuristic) {
    if (judge_filter(ex, *judge).keep) after_judge.push_back(std::move(ex));
  }
  stages.emplace_back("judge_kept", after_judge.size());

  std::vector<fim::FimExample> sampled;
  if (config.quota > 0 && config.quota < after_judge.size()) {
    sampled = stratified_sample(std::move(after_judge), config.quota, derive_seed(seed, "sample"));
    std::sort(sampled.begin(), sampled.end(),
              [](const fim::FimExample& a, const fim::FimExample& b) {
                auto ka = std::tie(a.metadata.at("repo"), a.path);
                auto kb = std::tie(b.metadata.at("repo"), b.path);
                return ka < kb;
              });
  } else {
    sampled = std::move(after_judge);
  }
  stages.emplace_back("sampled", sampled.size());

  BenchmarkDataset dataset;
  for (auto& ex : sampled) {
    DatasetEntry entry;
    entry.example = std::move(ex);
    dataset.entries.push_back(std::move(entry));
  }

  std::vector<ctx::RepoSnapshot> reference;
  for (const auto& path : config.reference_repos) {
    reference.push_back(ctx::RepoSnapshot::load(path));
  }
  dataset = dedup_leakage(std::move(dataset), reference, config.dedup_threshold);
  stages.emplace_back("dedup_kept", dataset.entries.size());

  // Attach context via the configured strategy. RAG windows are indexed once
  // per repo; every query reuses the same chunk sets.
  std::map<std::string, const ctx::RepoSnapshot*> snapshot_by_name;
  for (const auto& snap : snapshots) snapshot_by_name[snap.name] = &snap;
  std::map<std::string, ctx::RagIndex> rag_index;
  if (config.context_strategy == "rag") {
    std::set<std::string> needed;
    for (const auto& entry : dataset.entries) needed.insert(entry.example.metadata.at("repo"));
    for (const auto& name : needed) {
      rag_index.emplace(name, ctx::RagIndex(*snapshot_by_name.at(name), config.rag.window,
                                            config.rag.stride));
    }
  }
  for (auto& entry : dataset.entries) {
    const auto* repo = snapshot_by_name.at(entry.example.metadata.at("repo"));
    std::size_t cursor = codepoint_count(entry.example.prefix);
    auto query = ctx::make_cursor_query(*repo, entry.example.path, cursor, config.rag.window);
    if (config.context_strategy == "iou") {
      entry.context = ctx::strategy_iou(*repo, query, config.rag.k);
    } else if (config.context_strategy == "path") {
      entry.context = ctx::strategy_path_distance_bundle(*repo, query, config.rag.max_files);
    } else if (config.context_strategy == "rag") {
      entry.context = ctx::strategy_rag(*repo, query, config.rag,
                                        rag_index.at(entry.example.metadata.at("repo")));
    } else {
      throw std::invalid_argument("build: unknown context strategy '" + config.context_strategy +
                                  "'");
    }
  }

  // Stable ids after the final ordering.
  for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "ex-%06zu", i);
    dataset.entries[i].id = buf;
  }

  nlohmann::json effective = config.to_json();
  nlohmann::json stage_json = nlohmann::json::array();
  for (const auto& [name, count] : stages) {
    stage_json.push_back({{"stage", name}, {"count", count}});
  }
  dataset.manifest = {{"config", effective},
                      {"config_hash", hex64(fnv1a64(effective.dump()))},
                      {"seed", seed},
                      {"stages", stage_json},
                      {"examples", dataset.entries.size()}};

  if (dataset.entries.empty()) {
    std::string msg = "build: no examples survived;";
    for (const auto& [name, count] : stages) {
      msg += " " + name + "=" + std::to_string(count);
    }
    throw std::runtime_error(msg);
  }
  return dataset;
}

nlohmann::json entry_to_json(const DatasetEntry& entry) {
  return {{"id", entry.id},
          {"example", fim::to_json(entry.example)},
          {"context", ctx::to_json(entry.context)}};
}

DatasetEntry entry_from_json(const nlohmann::json& j) {
  DatasetEntry entry;
  entry.id = j.at("id").get<std::string>();
  entry.example = fim::example_from_json(j.at("example"));
  entry.context = ctx::bundle_from_json(j.at("context"));
  return entry;
}

void save(const BenchmarkDataset& dataset, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream data(fs::path(out_dir) / "dataset.jsonl");
  if (!data) throw std::runtime_error("cannot write dataset.jsonl under " + out_dir);
  for (const auto& entry : dataset.entries) {
    data << entry_to_json(entry).dump() << '\n';
  }
  std::ofstream manifest(fs::path(out_dir) / "manifest.json");
  if (!manifest) throw std::runtime_error("cannot write manifest.json under " + out_dir);
  manifest << dataset.manifest.dump(2) << '\n';
}

BenchmarkDataset load(const std::string& dataset_jsonl) {
  std::ifstream in(dataset_jsonl);
  if (!in) throw std::runtime_error("cannot open dataset: " + dataset_jsonl);
  BenchmarkDataset dataset;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    dataset.entries.push_back(entry_from_json(nlohmann::json::parse(line)));
  }
  return dataset;
}

}  // namespace fimkit::ds
