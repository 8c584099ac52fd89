#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fimkit/context.hpp"
#include "fimkit/dataset.hpp"
#include "fimkit/evalrun.hpp"
#include "fimkit/fim.hpp"
#include "fimkit/lexer.hpp"
#include "fimkit/metrics.hpp"
#include "fimkit/util.hpp"

namespace {

constexpr const char* kVersion = "fimkit 0.1.0";

struct GlobalConfig {
  std::size_t budget = 8192;
  fimkit::fim::SentinelSet sentinels;
  std::string profiles_path;
  fimkit::metrics::MetricConfig metric;
  fimkit::ctx::RagParams rag;
  std::uint64_t seed = 0;
  // http backend adaptation
  std::string prompt_field = "prompt";
  std::string text_field = "text";
  int timeout_ms = 30000;
  int retries = 2;
};

fimkit::fim::SentinelSet sentinels_from_json(const nlohmann::json& j) {
  fimkit::fim::SentinelSet s;
  s.suffix_marker = j.value("suffix", s.suffix_marker);
  s.prefix_marker = j.value("prefix", s.prefix_marker);
  s.middle_marker = j.value("middle", s.middle_marker);
  s.validate();
  return s;
}

GlobalConfig load_global_config(const std::string& path) {
  GlobalConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  cfg.budget = j.value("budget", cfg.budget);
  if (j.contains("sentinels")) cfg.sentinels = sentinels_from_json(j.at("sentinels"));
  cfg.profiles_path = j.value("profiles", std::string{});
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    cfg.metric.kk_tau = m.value("kk_tau", cfg.metric.kk_tau);
    cfg.metric.normalize = m.value("normalize", cfg.metric.normalize);
    std::string denom = m.value("kk_denominator", std::string{"max"});
    cfg.metric.kk_denominator = denom == "completion"
                                    ? fimkit::metrics::KkDenominator::Completion
                                    : fimkit::metrics::KkDenominator::Max;
  }
  if (j.contains("context")) {
    const auto& x = j.at("context");
    cfg.rag.window = x.value("window", cfg.rag.window);
    cfg.rag.stride = x.value("stride", cfg.rag.stride);
    cfg.rag.k = x.value("k", cfg.rag.k);
    cfg.rag.max_files = x.value("max_files", cfg.rag.max_files);
  }
  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    cfg.prompt_field = b.value("prompt_field", cfg.prompt_field);
    cfg.text_field = b.value("text_field", cfg.text_field);
    cfg.timeout_ms = b.value("timeout_ms", cfg.timeout_ms);
    cfg.retries = b.value("retries", cfg.retries);
  }
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

fimkit::fim::SentinelSet load_sentinels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sentinel file: " + path);
  return sentinels_from_json(nlohmann::json::parse(in));
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::string language_for_path(const std::string& path, const std::string& explicit_lang) {
  if (!explicit_lang.empty()) return explicit_lang;
  std::size_t dot = path.rfind('.');
  std::string lang =
      dot == std::string::npos ? "" : fimkit::lex::language_for_extension(path.substr(dot + 1));
  if (lang.empty()) {
    throw std::runtime_error("cannot infer language for " + path + "; pass --language");
  }
  return lang;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fill-in-the-middle dataset construction and completion evaluation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  app.add_option("--config", config_path, "global config file (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "seed for generating commands");
  app.add_option("--jobs", jobs, "worker pool size")->check(CLI::PositiveNumber);

  // split
  auto* split = app.add_subcommand("split", "produce one FIM example from a file");
  std::string split_file, split_lang, split_strategy = "scope", split_out;
  split->add_option("--file", split_file, "source file")->required();
  split->add_option("--language", split_lang, "language id (inferred from extension otherwise)");
  split->add_option("--strategy", split_strategy, "random|scope")
      ->check(CLI::IsMember({"random", "scope"}));
  split->add_option("--out", split_out, "output path (default stdout)");

  // pack-context
  auto* pack = app.add_subcommand("pack-context", "collect project context for a cursor");
  std::string pack_repo, pack_file, pack_strategy = "rag", pack_out;
  std::size_t pack_cursor = 0, pack_k = 16, pack_window = 20, pack_stride = 10, pack_max_files = 64;
  std::vector<std::string> pack_recent;
  pack->add_option("--repo", pack_repo, "repository directory")->required();
  pack->add_option("--file", pack_file, "query file (relative path)")->required();
  pack->add_option("--cursor", pack_cursor, "cursor offset in characters")->required();
  pack->add_option("--strategy", pack_strategy, "iou|path|rag")
      ->check(CLI::IsMember({"iou", "path", "rag"}));
  pack->add_option("--k", pack_k, "chunks to keep");
  pack->add_option("--window", pack_window, "sliding window size in lines");
  pack->add_option("--stride", pack_stride, "sliding window stride in lines");
  pack->add_option("--max-files", pack_max_files, "candidate file cap");
  pack->add_option("--recent", pack_recent, "recently opened files (extra candidates)");
  pack->add_option("--out", pack_out, "output path (default stdout)");

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "build a benchmark dataset");
  std::string build_config, build_out = "dataset";
  build->add_option("--config", build_config, "build config file (JSON)")->required();
  build->add_option("--out", build_out, "output directory");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "run completions over a dataset and score them");
  std::string eval_dataset, eval_backend = "echo", eval_endpoint, eval_replay, eval_sentinels;
  std::string eval_out = "records.jsonl", eval_kk_denominator = "max";
  std::size_t eval_budget = 0;
  int eval_max_tokens = 256;
  double eval_temperature = 0.0, eval_kk_tau = 0.0;
  bool eval_no_normalize = false, eval_scope_truncate = false;
  std::vector<std::string> eval_stop;
  evaluate->add_option("--dataset", eval_dataset, "dataset.jsonl path")->required();
  evaluate->add_option("--backend", eval_backend, "http|replay|echo|truncate:N|empty");
  evaluate->add_option("--endpoint", eval_endpoint, "http backend endpoint URL");
  evaluate->add_option("--replay", eval_replay, "replay file (JSONL of id/completion)");
  evaluate->add_option("--max-tokens", eval_max_tokens, "generation cap");
  evaluate->add_option("--temperature", eval_temperature, "sampling temperature");
  evaluate->add_option("--stop", eval_stop, "stop sequences");
  evaluate->add_option("--budget", eval_budget, "prompt token budget");
  evaluate->add_option("--sentinels", eval_sentinels, "sentinel set file (JSON)");
  evaluate->add_option("--kk-tau", eval_kk_tau, "KK line-match threshold");
  evaluate->add_option("--kk-denominator", eval_kk_denominator, "completion|max")
      ->check(CLI::IsMember({"completion", "max"}));
  evaluate->add_flag("--no-normalize-em", eval_no_normalize, "disable whitespace normalization");
  evaluate->add_flag("--scope-truncate", eval_scope_truncate,
                     "cut completions at the enclosing scope exit");
  evaluate->add_option("--out", eval_out, "records output path");

  // report
  auto* report = app.add_subcommand("report", "aggregate records into per-language tables");
  std::string report_records, report_format = "table";
  report->add_option("--records", report_records, "records.jsonl path")->required();
  report->add_option("--format", report_format, "table|json")
      ->check(CLI::IsMember({"table", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  seed_given = seed_opt->count() > 0;

  try {
    GlobalConfig cfg = load_global_config(config_path);
    if (seed_given) cfg.seed = seed;
    if (cfg.budget < 256) throw std::runtime_error("budget must be >= 256 tokens");
    if (*evaluate && eval_budget > 0 && eval_budget < 256) {
      throw std::runtime_error("budget must be >= 256 tokens");
    }

    if (*split) {
      std::map<std::string, fimkit::lex::LanguageProfile> extra;
      if (!cfg.profiles_path.empty()) extra = fimkit::lex::load_profiles(cfg.profiles_path);
      fimkit::fim::SourceFile src;
      src.path = split_file;
      src.text = read_file(split_file);
      src.language = language_for_path(split_file, split_lang);
      const auto& profile = fimkit::lex::resolve_profile(extra, src.language);
      fimkit::fim::FimExample ex =
          split_strategy == "random"
              ? fimkit::fim::split_random(src, cfg.seed)
              : fimkit::fim::split_scope_aware(src, profile, cfg.seed);
      write_text(split_out, fimkit::fim::to_json(ex).dump() + "\n");
    } else if (*pack) {
      auto repo = fimkit::ctx::RepoSnapshot::load(pack_repo);
      auto query = fimkit::ctx::make_cursor_query(repo, pack_file, pack_cursor, pack_window);
      fimkit::ctx::ContextBundle bundle;
      if (pack_strategy == "iou") {
        bundle = fimkit::ctx::strategy_iou(repo, query, pack_k);
      } else if (pack_strategy == "path") {
        bundle = fimkit::ctx::strategy_path_distance_bundle(repo, query, pack_max_files);
      } else {
        fimkit::ctx::RagParams params;
        params.window = pack_window;
        params.stride = pack_stride;
        params.k = pack_k;
        params.max_files = pack_max_files;
        params.recent = pack_recent;
        bundle = fimkit::ctx::strategy_rag(repo, query, params);
      }
      write_text(pack_out, fimkit::ctx::to_json(bundle).dump(2) + "\n");
    } else if (*build) {
      std::ifstream in(build_config);
      if (!in) throw std::runtime_error("cannot open config: " + build_config);
      auto config = fimkit::ds::BuildConfig::from_json(nlohmann::json::parse(in));
      auto dataset = fimkit::ds::build(config, cfg.seed);
      fimkit::ds::save(dataset, build_out);
      std::cerr << "wrote " << dataset.entries.size() << " examples to " << build_out << "\n";
    } else if (*evaluate) {
      auto dataset = fimkit::ds::load(eval_dataset);
      auto backend = fimkit::ev::parse_backend_spec(eval_backend);
      backend.endpoint = eval_endpoint;
      backend.replay_path = eval_replay;
      backend.prompt_field = cfg.prompt_field;
      backend.text_field = cfg.text_field;
      backend.timeout_ms = cfg.timeout_ms;
      backend.retries = cfg.retries;
      if (backend.kind == fimkit::ev::BackendConfig::Kind::Http && eval_endpoint.empty()) {
        throw std::runtime_error("http backend requires --endpoint");
      }
      if (backend.kind == fimkit::ev::BackendConfig::Kind::Replay && eval_replay.empty()) {
        throw std::runtime_error("replay backend requires --replay");
      }
      fimkit::ev::CompletionClient client(backend);
      fimkit::ev::EvalOptions options;
      options.sentinels = eval_sentinels.empty() ? cfg.sentinels : load_sentinels(eval_sentinels);
      options.budget = eval_budget > 0 ? eval_budget : cfg.budget;
      options.metric = cfg.metric;
      if (eval_kk_tau > 0.0) options.metric.kk_tau = eval_kk_tau;
      if (eval_kk_denominator == "completion") {
        options.metric.kk_denominator = fimkit::metrics::KkDenominator::Completion;
      }
      if (eval_no_normalize) options.metric.normalize = false;
      options.gen.max_tokens = eval_max_tokens;
      options.gen.temperature = eval_temperature;
      options.gen.stop = eval_stop;
      options.jobs = jobs;
      options.scope_truncate = eval_scope_truncate;
      auto records = fimkit::ev::run_eval(dataset, client, options);
      fimkit::ev::save_records(records, eval_out);
      std::size_t failed = 0;
      for (const auto& r : records) failed += r.failed ? 1 : 0;
      // Echo the effective settings next to the records.
      nlohmann::json meta = {{"backend", eval_backend},
                             {"budget", options.budget},
                             {"kk_tau", options.metric.kk_tau},
                             {"kk_denominator",
                              options.metric.kk_denominator ==
                                      fimkit::metrics::KkDenominator::Completion
                                  ? "completion"
                                  : "max"},
                             {"normalize", options.metric.normalize},
                             {"scope_truncate", options.scope_truncate},
                             {"sentinels",
                              {{"suffix", options.sentinels.suffix_marker},
                               {"prefix", options.sentinels.prefix_marker},
                               {"middle", options.sentinels.middle_marker}}},
                             {"records", records.size()},
                             {"failed", failed}};
      std::ofstream metaout(eval_out + ".meta.json");
      if (metaout) metaout << meta.dump(2) << "\n";
      std::cerr << "evaluated " << records.size() << " examples (" << failed << " failed) -> "
                << eval_out << "\n";
    } else if (*report) {
      auto records = fimkit::ev::load_records(report_records);
      auto rep = fimkit::ev::make_report(records);
      if (report_format == "json") {
        std::cout << fimkit::ev::report_to_json(rep).dump(2) << "\n";
      } else {
        std::cout << fimkit::ev::render_table(rep);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
