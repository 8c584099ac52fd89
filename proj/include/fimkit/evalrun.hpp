#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fimkit/dataset.hpp"
#include "fimkit/fim.hpp"
#include "fimkit/metrics.hpp"

namespace fimkit::ev {

struct GenParams {
  int max_tokens = 256;
  double temperature = 0.0;
  std::vector<std::string> stop;
};

struct BackendConfig {
  enum class Kind { Http, Replay, OracleEcho, OracleTruncate, OracleEmpty };
  Kind kind = Kind::OracleEcho;
  std::string endpoint;       // Http
  int timeout_ms = 30000;     // Http
  int retries = 2;            // Http: attempts after the first failure
  std::string prompt_field = "prompt";
  std::string text_field = "text";
  std::string replay_path;    // Replay
  int truncate_lines = 1;     // OracleTruncate
};

// "echo" | "empty" | "truncate:N" | "replay" | "http"
BackendConfig parse_backend_spec(const std::string& spec);

// Raised when one example fails; the run records it and moves on.
struct ExampleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class CompletionClient {
 public:
  explicit CompletionClient(BackendConfig config);
  ~CompletionClient();
  CompletionClient(const CompletionClient&) = delete;
  CompletionClient& operator=(const CompletionClient&) = delete;

  const BackendConfig& config() const { return config_; }

  // Http posts {prompt, max_tokens, temperature, stop} and reads {text} with
  // configurable field names; oracles answer from the example itself.
  std::string complete(const ds::DatasetEntry& entry, const fim::RenderedPrompt& prompt,
                       const GenParams& params);

 private:
  BackendConfig config_;
  std::map<std::string, std::string> replay_;
  struct HttpState;
  std::unique_ptr<HttpState> http_;
};

struct EvalRecord {
  std::string id;
  std::string language;
  std::string prompt_digest;
  std::string completion;
  double latency_ms = 0.0;
  metrics::MetricResult result;
  bool failed = false;
  std::string error;
};

struct EvalOptions {
  fim::SentinelSet sentinels;
  std::size_t budget = 8192;
  metrics::MetricConfig metric;
  GenParams gen;
  int jobs = 1;
  bool scope_truncate = false;  // cut completions at the enclosing scope exit
};

// Renders, completes and scores every entry. Failures mark the record and
// are excluded from aggregates; more than 50% failures abort the run.
std::vector<EvalRecord> run_eval(const ds::BenchmarkDataset& dataset, CompletionClient& client,
                                 const EvalOptions& options);

// Cuts the completion where it would leave the scope it started in.
std::string truncate_to_scope(const std::string& completion, const lex::LanguageProfile& profile);

struct LanguageRow {
  std::string language;
  std::size_t n = 0;
  double em = 0.0;
  double chrf_pp = 0.0;
  double kk = 0.0;
  double completion_lines = 0.0;
  double truth_lines = 0.0;
};

struct Report {
  std::vector<LanguageRow> rows;  // sorted by language
  LanguageRow average;            // unweighted mean over languages
};

Report make_report(std::span<const EvalRecord> records);  // throws on empty
std::string render_table(const Report& report);
nlohmann::json report_to_json(const Report& report);

void save_records(std::span<const EvalRecord> records, const std::string& path);
std::vector<EvalRecord> load_records(const std::string& path);

}  // namespace fimkit::ev
