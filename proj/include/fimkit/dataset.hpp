#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fimkit/context.hpp"
#include "fimkit/fim.hpp"
#include "fimkit/lexer.hpp"

namespace fimkit::ds {

enum class FilterReason { CommentDominated, LiteralDominated, WhitespaceDominated, JudgeRejected };

const char* to_string(FilterReason r);

struct FilterVerdict {
  bool keep = true;
  std::vector<FilterReason> reasons;  // keep == reasons.empty()
};

struct FilterThresholds {
  double comment = 0.5;
  double literal = 0.5;  // string + numeric character mass combined
  double whitespace = 0.5;
};

// Character-mass fractions of the middle per token class; any fraction above
// its threshold adds the matching reason.
FilterVerdict heuristic_filter(const fim::FimExample& example,
                               const lex::LanguageProfile& profile,
                               const FilterThresholds& thresholds = {});

// Thrown when a judge cannot be reached, as opposed to rejecting an example.
struct JudgeTransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual bool accepts(const fim::FimExample& example) = 0;
};

class AcceptAllJudge : public JudgeBackend {
 public:
  bool accepts(const fim::FimExample&) override { return true; }
};

class RejectAllJudge : public JudgeBackend {
 public:
  bool accepts(const fim::FimExample&) override { return false; }
};

// Scripted verdicts by example path; a missing entry is a transport error.
class ScriptedJudge : public JudgeBackend {
 public:
  explicit ScriptedJudge(std::map<std::string, bool> verdicts) : verdicts_(std::move(verdicts)) {}
  bool accepts(const fim::FimExample& example) override;

 private:
  std::map<std::string, bool> verdicts_;
};

FilterVerdict judge_filter(const fim::FimExample& example, JudgeBackend& judge);

struct StratumKey {
  std::string topic = "unknown";
  std::string age = "unknown";
  std::string popularity = "unknown";
  std::string role = "source";    // test vs source
  std::string strategy = "scope_aware";

  auto tie() const { return std::tie(topic, age, popularity, role, strategy); }
  bool operator<(const StratumKey& o) const { return tie() < o.tie(); }
  bool operator==(const StratumKey& o) const { return tie() == o.tie(); }
};

StratumKey stratum_of(const fim::FimExample& example);

// Proportional allocation with largest-remainder rounding; every non-empty
// stratum receives at least one example when the quota allows. Uniform
// sampling inside a stratum under the seed. Throws when quota > pool size.
std::vector<fim::FimExample> stratified_sample(
    std::vector<fim::FimExample> pool, std::size_t quota, std::uint64_t seed,
    const std::function<StratumKey(const fim::FimExample&)>& key_fn = stratum_of);

struct DatasetEntry {
  std::string id;
  fim::FimExample example;
  ctx::ContextBundle context;
};

struct BenchmarkDataset {
  std::vector<DatasetEntry> entries;
  nlohmann::json manifest;
};

// Drops examples whose repo or file path appears in the reference set, whose
// source file is a near-duplicate (line IoU >= threshold) of any reference
// file, or of an earlier dataset file. Threshold must be in (0, 1].
BenchmarkDataset dedup_leakage(BenchmarkDataset dataset,
                               const std::vector<ctx::RepoSnapshot>& reference,
                               double threshold);

struct RepoSpec {
  std::string path;
  std::string name;  // defaults to the directory name
};

struct BuildConfig {
  std::vector<RepoSpec> repos;
  std::vector<std::string> languages;  // must resolve to known profiles
  std::size_t quota = 0;               // 0 = keep everything
  std::string judge = "accept_all";    // accept_all | reject_all
  FilterThresholds thresholds;
  double dedup_threshold = 0.7;
  std::vector<std::string> reference_repos;
  std::string context_strategy = "rag";  // iou | path | rag
  ctx::RagParams rag;
  fim::ScopeWeights scope_weights;
  std::string profiles_path;  // optional extra language profiles

  static BuildConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// ingest -> scope split -> heuristic filter -> judge -> stratified sample ->
// dedup -> attach context. The manifest records the effective config, its
// hash, the seed and per-stage attrition counts. Throws when nothing
// survives.
BenchmarkDataset build(const BuildConfig& config, std::uint64_t seed);

void save(const BenchmarkDataset& dataset, const std::string& out_dir);
BenchmarkDataset load(const std::string& dataset_jsonl);

nlohmann::json entry_to_json(const DatasetEntry& entry);
DatasetEntry entry_from_json(const nlohmann::json& j);

}  // namespace fimkit::ds
