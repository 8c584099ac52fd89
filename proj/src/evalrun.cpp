#include "fimkit/evalrun.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "fimkit/util.hpp"

namespace fimkit::ev {

BackendConfig parse_backend_spec(const std::string& spec) {
  BackendConfig c;
  if (spec == "echo") {
    c.kind = BackendConfig::Kind::OracleEcho;
  } else if (spec == "empty") {
    c.kind = BackendConfig::Kind::OracleEmpty;
  } else if (spec.rfind("truncate:", 0) == 0) {
    c.kind = BackendConfig::Kind::OracleTruncate;
    c.truncate_lines = std::stoi(spec.substr(9));
    if (c.truncate_lines < 0) throw std::invalid_argument("truncate:N requires N >= 0");
  } else if (spec == "replay") {
    c.kind = BackendConfig::Kind::Replay;
  } else if (spec == "http") {
    c.kind = BackendConfig::Kind::Http;
  } else {
    throw std::invalid_argument("unknown backend '" + spec + "'");
  }
  return c;
}

struct CompletionClient::HttpState {
  std::string host;
  int port = 80;
  std::string path = "/";

  // Splits http://host:port/path. Minimal on purpose; https is out of scope.
  explicit HttpState(const std::string& endpoint) {
    std::string rest = endpoint;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
    std::size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    path = slash == std::string::npos ? "/" : rest.substr(slash);
    std::size_t colon = hostport.rfind(':');
    if (colon == std::string::npos) {
      host = hostport;
      port = 80;
    } else {
      host = hostport.substr(0, colon);
      port = std::stoi(hostport.substr(colon + 1));
    }
    if (host.empty()) throw std::invalid_argument("bad endpoint: " + endpoint);
  }
};

CompletionClient::CompletionClient(BackendConfig config) : config_(std::move(config)) {
  switch (config_.kind) {
    case BackendConfig::Kind::Replay: {
      std::ifstream in(config_.replay_path);
      if (!in) throw std::runtime_error("cannot open replay file: " + config_.replay_path);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        replay_[j.at("id").get<std::string>()] = j.at("completion").get<std::string>();
      }
      break;
    }
    case BackendConfig::Kind::Http: {
      http_ = std::make_unique<HttpState>(config_.endpoint);
      break;
    }
    default:
      break;
  }
}

CompletionClient::~CompletionClient() = default;

std::string CompletionClient::complete(const ds::DatasetEntry& entry,
                                       const fim::RenderedPrompt& prompt,
                                       const GenParams& params) {
  switch (config_.kind) {
    case BackendConfig::Kind::OracleEcho:
      return entry.example.middle;
    case BackendConfig::Kind::OracleEmpty:
      return {};
    case BackendConfig::Kind::OracleTruncate: {
      auto lines = split_lines(entry.example.middle);
      std::size_t n = std::min<std::size_t>(lines.size(),
                                            static_cast<std::size_t>(config_.truncate_lines));
      std::string out;
      for (std::size_t i = 0; i < n; ++i) {
        if (i) out.push_back('\n');
        out += lines[i];
      }
      return out;
    }
    case BackendConfig::Kind::Replay: {
      auto it = replay_.find(entry.id);
      if (it == replay_.end()) {
        throw ExampleError("replay file has no completion for id " + entry.id);
      }
      return it->second;
    }
    case BackendConfig::Kind::Http: {
      nlohmann::json body = {{config_.prompt_field, prompt.text},
                             {"max_tokens", params.max_tokens},
                             {"temperature", params.temperature},
                             {"stop", params.stop}};
      std::string payload = body.dump();
      std::string last_error;
      for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        httplib::Client client(http_->host, http_->port);
        client.set_connection_timeout(0, config_.timeout_ms * 1000);
        client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
        auto res = client.Post(http_->path, payload, "application/json");
        if (!res) {
          last_error = "transport error: " + httplib::to_string(res.error());
          continue;
        }
        if (res->status != 200) {
          last_error = "http status " + std::to_string(res->status);
          continue;
        }
        try {
          nlohmann::json j = nlohmann::json::parse(res->body);
          return j.at(config_.text_field).get<std::string>();
        } catch (const nlohmann::json::exception& e) {
          last_error = std::string("bad response body: ") + e.what();
        }
      }
      throw ExampleError("http backend failed after " + std::to_string(config_.retries + 1) +
                         " attempts: " + last_error);
    }
  }
  throw std::logic_error("unreachable backend kind");
}

std::string truncate_to_scope(const std::string& completion, const lex::LanguageProfile& profile) {
  if (completion.empty()) return completion;
  if (profile.indent_based) {
    auto lines = split_lines(completion);
    long base = -1;
    std::string out;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string& line = lines[i];
      if (!is_blank(line)) {
        long indent = 0;
        while (indent < static_cast<long>(line.size()) &&
               (line[static_cast<std::size_t>(indent)] == ' ' ||
                line[static_cast<std::size_t>(indent)] == '\t')) {
          ++indent;
        }
        if (base < 0) {
          base = indent;
        } else if (indent < base) {
          return completion.substr(0, offset);
        }
      }
      offset += line.size() + 1;  // '\n'
    }
    return completion;
  }
  // Brace languages: cut where the depth drops below the starting level.
  long depth = 0;
  auto spans = lex::classify(completion, profile);
  for (const auto& span : spans) {
    if (span.kind != lex::TokenClass::Code && span.kind != lex::TokenClass::NumericLiteral) {
      continue;
    }
    for (std::size_t i = span.begin; i < span.end; ++i) {
      for (const auto& [open, close] : profile.blocks) {
        if (completion.compare(i, open.size(), open) == 0) ++depth;
        if (completion.compare(i, close.size(), close) == 0) {
          --depth;
          if (depth < 0) return completion.substr(0, i);
        }
      }
    }
  }
  return completion;
}

namespace {

std::string apply_stops(std::string text, const std::vector<std::string>& stops) {
  std::size_t cut = std::string::npos;
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    std::size_t pos = text.find(stop);
    if (pos != std::string::npos) cut = std::min(cut, pos);
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

}  // namespace

std::vector<EvalRecord> run_eval(const ds::BenchmarkDataset& dataset, CompletionClient& client,
                                 const EvalOptions& options) {
  if (dataset.entries.empty()) throw std::invalid_argument("run_eval: empty dataset");
  std::vector<EvalRecord> records(dataset.entries.size());
  std::atomic<std::size_t> next{0};
  int jobs = std::max(1, options.jobs);

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= dataset.entries.size()) return;
      const auto& entry = dataset.entries[i];
      EvalRecord& rec = records[i];
      rec.id = entry.id;
      rec.language = entry.example.language;
      try {
        auto prompt = fim::render_prompt(entry.example, entry.context, options.sentinels,
                                         options.budget);
        rec.prompt_digest = hex64(fnv1a64(prompt.text));
        auto t0 = std::chrono::steady_clock::now();
        std::string completion = client.complete(entry, prompt, options.gen);
        auto t1 = std::chrono::steady_clock::now();
        rec.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        completion = apply_stops(std::move(completion), options.gen.stop);
        if (options.scope_truncate && !entry.example.language.empty()) {
          completion = truncate_to_scope(completion,
                                         lex::builtin_profile(entry.example.language));
        }
        rec.completion = std::move(completion);
        rec.result = metrics::score(rec.completion, entry.example.middle, options.metric);
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::sort(records.begin(), records.end(),
            [](const EvalRecord& a, const EvalRecord& b) { return a.id < b.id; });
  std::size_t failed = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.failed; }));
  if (failed * 2 > records.size()) {
    throw std::runtime_error("run_eval: " + std::to_string(failed) + " of " +
                             std::to_string(records.size()) + " examples failed");
  }
  return records;
}

Report make_report(std::span<const EvalRecord> records) {
  std::map<std::string, std::vector<const EvalRecord*>> by_language;
  for (const auto& rec : records) {
    if (!rec.failed) by_language[rec.language].push_back(&rec);
  }
  if (by_language.empty()) throw std::invalid_argument("report: no successful records");
  Report report;
  for (const auto& [language, recs] : by_language) {
    LanguageRow row;
    row.language = language;
    row.n = recs.size();
    for (const auto* r : recs) {
      row.em += r->result.em;
      row.chrf_pp += r->result.chrf_pp;
      row.kk += r->result.kk;
      row.completion_lines += r->result.completion_lines;
      row.truth_lines += r->result.truth_lines;
    }
    double n = static_cast<double>(recs.size());
    row.em /= n;
    row.chrf_pp /= n;
    row.kk /= n;
    row.completion_lines /= n;
    row.truth_lines /= n;
    report.rows.push_back(std::move(row));
  }
  LanguageRow avg;
  avg.language = "average";
  for (const auto& row : report.rows) {
    avg.n += row.n;
    avg.em += row.em;
    avg.chrf_pp += row.chrf_pp;
    avg.kk += row.kk;
    avg.completion_lines += row.completion_lines;
    avg.truth_lines += row.truth_lines;
  }
  double k = static_cast<double>(report.rows.size());
  avg.em /= k;
  avg.chrf_pp /= k;
  avg.kk /= k;
  avg.completion_lines /= k;
  avg.truth_lines /= k;
  report.average = std::move(avg);
  return report;
}

std::string render_table(const Report& report) {
  std::ostringstream out;
  auto line = [&](const std::string& lang, std::size_t n, double em, double chrf, double kk,
                  double cl, double tl) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %6zu %8.4f %8.2f %8.4f %10.2f %10.2f\n", lang.c_str(),
                  n, em, chrf, kk, cl, tl);
    out << buf;
  };
  out << "language          n       em    chrf++       kk   mean_cl    mean_tl\n";
  out << "--------------------------------------------------------------------\n";
  for (const auto& row : report.rows) {
    line(row.language, row.n, row.em, row.chrf_pp, row.kk, row.completion_lines, row.truth_lines);
  }
  out << "--------------------------------------------------------------------\n";
  const auto& a = report.average;
  line(a.language, a.n, a.em, a.chrf_pp, a.kk, a.completion_lines, a.truth_lines);
  return out.str();
}

nlohmann::json report_to_json(const Report& report) {
  auto row_json = [](const LanguageRow& row) {
    return nlohmann::json{{"language", row.language},
                          {"n", row.n},
                          {"em", row.em},
                          {"chrf_pp", row.chrf_pp},
                          {"kk", row.kk},
                          {"mean_completion_lines", row.completion_lines},
                          {"mean_truth_lines", row.truth_lines}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) rows.push_back(row_json(row));
  return {{"languages", rows}, {"average", row_json(report.average)}};
}

void save_records(std::span<const EvalRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write records: " + path);
  for (const auto& rec : records) {
    nlohmann::json j = {{"id", rec.id},
                        {"language", rec.language},
                        {"prompt_digest", rec.prompt_digest},
                        {"completion", rec.completion},
                        {"latency_ms", rec.latency_ms},
                        {"failed", rec.failed},
                        {"error", rec.error},
                        {"metrics",
                         {{"em", rec.result.em},
                          {"chrf_pp", rec.result.chrf_pp},
                          {"kk", rec.result.kk},
                          {"completion_lines", rec.result.completion_lines},
                          {"truth_lines", rec.result.truth_lines}}}};
    out << j.dump() << '\n';
  }
}

std::vector<EvalRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records: " + path);
  std::vector<EvalRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    EvalRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.language = j.value("language", std::string{});
    rec.prompt_digest = j.value("prompt_digest", std::string{});
    rec.completion = j.value("completion", std::string{});
    rec.latency_ms = j.value("latency_ms", 0.0);
    rec.failed = j.value("failed", false);
    rec.error = j.value("error", std::string{});
    const auto& m = j.at("metrics");
    rec.result.em = m.value("em", 0);
    rec.result.chrf_pp = m.value("chrf_pp", 0.0);
    rec.result.kk = m.value("kk", 0.0);
    rec.result.completion_lines = m.value("completion_lines", 0);
    rec.result.truth_lines = m.value("truth_lines", 0);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace fimkit::ev
