#include "fimkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "fimkit/similarity.hpp"
#include "fimkit/util.hpp"

namespace fimkit::metrics {

std::string normalize_completion(std::string_view text) {
  std::vector<std::string> lines = split_lines(text);
  for (auto& line : lines) {
    std::size_t end = line.size();
    while (end > 0 && (line[end - 1] == ' ' || line[end - 1] == '\t')) --end;
    line.resize(end);
  }
  std::size_t first = 0, last = lines.size();
  while (first < last && lines[first].empty()) ++first;
  while (last > first && lines[last - 1].empty()) --last;
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i > first) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

int exact_match(std::string_view completion, std::string_view truth, bool normalize) {
  if (!normalize) return completion == truth ? 1 : 0;
  return normalize_completion(completion) == normalize_completion(truth) ? 1 : 0;
}

namespace {

constexpr int kCharOrder = 6;
constexpr int kWordOrder = 2;
constexpr double kBeta = 2.0;

bool is_space_cp(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f';
}

bool is_ascii_punct(char32_t c) {
  return (c >= U'!' && c <= U'/') || (c >= U':' && c <= U'@') || (c >= U'[' && c <= U'`') ||
         (c >= U'{' && c <= U'~');
}

// chrF++ word tokens: whitespace-separated, with one leading or trailing
// punctuation character split off.
std::vector<std::u32string> word_tokens(const std::u32string& text) {
  std::vector<std::u32string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space_cp(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space_cp(text[i])) ++i;
    if (i == start) break;
    std::u32string w = text.substr(start, i - start);
    if (w.size() > 1 && is_ascii_punct(w.back())) {
      words.push_back(w.substr(0, w.size() - 1));
      words.push_back(w.substr(w.size() - 1));
    } else if (w.size() > 1 && is_ascii_punct(w.front())) {
      words.push_back(w.substr(0, 1));
      words.push_back(w.substr(1));
    } else {
      words.push_back(std::move(w));
    }
  }
  return words;
}

struct OrderStats {
  std::size_t hyp_total = 0;
  std::size_t ref_total = 0;
  std::size_t matched = 0;
};

using GramCounts = std::map<std::u32string, std::size_t>;

GramCounts char_ngrams(const std::u32string& seq, int n) {
  GramCounts counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
    ++counts[seq.substr(i, static_cast<std::size_t>(n))];
  }
  return counts;
}

GramCounts word_ngrams(const std::vector<std::u32string>& words, int n) {
  GramCounts counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
    std::u32string key;
    for (int k = 0; k < n; ++k) {
      if (k) key.push_back(U'');  // separator that cannot appear in a word
      key += words[i + static_cast<std::size_t>(k)];
    }
    ++counts[key];
  }
  return counts;
}

OrderStats match_stats(const GramCounts& hyp, const GramCounts& ref) {
  OrderStats s;
  for (const auto& [g, c] : hyp) s.hyp_total += c;
  for (const auto& [g, c] : ref) s.ref_total += c;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) s.matched += std::min(c, it->second);
  }
  return s;
}

}  // namespace

double chrf_pp(std::string_view completion, std::string_view truth) {
  std::u32string hyp = decode_utf8(completion);
  std::u32string ref = decode_utf8(truth);

  std::u32string hyp_chars, ref_chars;
  for (char32_t c : hyp) {
    if (!is_space_cp(c)) hyp_chars.push_back(c);
  }
  for (char32_t c : ref) {
    if (!is_space_cp(c)) ref_chars.push_back(c);
  }
  auto hyp_words = word_tokens(hyp);
  auto ref_words = word_tokens(ref);

  double f_sum = 0.0;
  int effective = 0;
  auto accumulate = [&](const OrderStats& s) {
    if (s.hyp_total == 0 && s.ref_total == 0) return;
    ++effective;
    double prec = s.hyp_total ? static_cast<double>(s.matched) / static_cast<double>(s.hyp_total) : 0.0;
    double rec = s.ref_total ? static_cast<double>(s.matched) / static_cast<double>(s.ref_total) : 0.0;
    double denom = kBeta * kBeta * prec + rec;
    if (denom > 0.0) f_sum += (1.0 + kBeta * kBeta) * prec * rec / denom;
  };
  for (int n = 1; n <= kCharOrder; ++n) {
    accumulate(match_stats(char_ngrams(hyp_chars, n), char_ngrams(ref_chars, n)));
  }
  for (int n = 1; n <= kWordOrder; ++n) {
    accumulate(match_stats(word_ngrams(hyp_words, n), word_ngrams(ref_words, n)));
  }
  if (effective == 0) return 100.0;  // neither side has any content
  return 100.0 * f_sum / static_cast<double>(effective);
}

namespace {

std::vector<std::string> content_lines(std::string_view text) {
  std::vector<std::string> lines;
  for (auto& line : split_lines(text)) {
    if (!is_blank(line)) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

double kk_score(std::string_view completion, std::string_view truth, double tau,
                KkDenominator denom) {
  if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("kk_score: tau must be in (0, 1]");
  auto comp = content_lines(completion);
  auto ref = content_lines(truth);
  if (comp.empty() && ref.empty()) return 1.0;
  if (comp.empty()) return 0.0;
  std::size_t matched = 0;
  for (const auto& line : comp) {
    bool hit = false;
    for (const auto& candidate : ref) {
      if (sim::normalized_levenshtein_similarity(line, candidate) >= tau) {
        hit = true;
        break;
      }
    }
    if (!hit) break;
    ++matched;
  }
  std::size_t d = denom == KkDenominator::Max ? std::max(comp.size(), ref.size()) : comp.size();
  return static_cast<double>(matched) / static_cast<double>(d);
}

MetricResult score(std::string_view completion, std::string_view truth,
                   const MetricConfig& config) {
  std::string c, t;
  std::string_view cv = completion, tv = truth;
  if (config.normalize) {
    c = normalize_completion(completion);
    t = normalize_completion(truth);
    cv = c;
    tv = t;
  }
  MetricResult r;
  r.em = cv == tv ? 1 : 0;
  r.chrf_pp = chrf_pp(cv, tv);
  r.kk = kk_score(cv, tv, config.kk_tau, config.kk_denominator);
  r.completion_lines = static_cast<int>(content_lines(cv).size());
  r.truth_lines = static_cast<int>(content_lines(tv).size());
  return r;
}

std::pair<double, double> mean_lines(std::span<const MetricResult> results) {
  if (results.empty()) throw std::invalid_argument("mean_lines: empty result list");
  double csum = 0.0, tsum = 0.0;
  for (const auto& r : results) {
    csum += r.completion_lines;
    tsum += r.truth_lines;
  }
  double n = static_cast<double>(results.size());
  return {csum / n, tsum / n};
}

const char* to_string(TelemetryEvent::Kind k) {
  switch (k) {
    case TelemetryEvent::Kind::Shown: return "shown";
    case TelemetryEvent::Kind::Accepted: return "accepted";
    case TelemetryEvent::Kind::TypedChars: return "typed_chars";
    case TelemetryEvent::Kind::CompletedChars: return "completed_chars";
  }
  return "shown";
}

double rocc(std::span<const TelemetryEvent> events) {
  std::int64_t typed = 0, completed = 0;
  for (const auto& e : events) {
    if (e.count < 0) throw std::invalid_argument("telemetry: negative character count");
    if (e.kind == TelemetryEvent::Kind::TypedChars) typed += e.count;
    if (e.kind == TelemetryEvent::Kind::CompletedChars) completed += e.count;
  }
  std::int64_t total = typed + completed;
  if (total == 0) return 0.0;
  return static_cast<double>(completed) / static_cast<double>(total);
}

double acceptance_rate(std::span<const TelemetryEvent> events) {
  // Validate per session in time order: an acceptance needs a prior showing.
  std::map<std::string, std::vector<const TelemetryEvent*>> sessions;
  for (const auto& e : events) {
    if (e.kind == TelemetryEvent::Kind::Shown || e.kind == TelemetryEvent::Kind::Accepted) {
      sessions[e.session].push_back(&e);
    }
  }
  std::size_t shown = 0, accepted = 0;
  for (auto& [session, list] : sessions) {
    std::stable_sort(list.begin(), list.end(), [](const TelemetryEvent* a, const TelemetryEvent* b) {
      if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
      // Shown sorts before Accepted at equal timestamps.
      return a->kind == TelemetryEvent::Kind::Shown && b->kind == TelemetryEvent::Kind::Accepted;
    });
    std::int64_t balance = 0;
    for (const TelemetryEvent* e : list) {
      if (e->kind == TelemetryEvent::Kind::Shown) {
        ++balance;
        ++shown;
      } else {
        --balance;
        ++accepted;
        if (balance < 0) {
          throw std::invalid_argument("telemetry: acceptance without a prior showing in session " +
                                      session);
        }
      }
    }
  }
  if (shown == 0) return 0.0;
  return static_cast<double>(accepted) / static_cast<double>(shown);
}

std::vector<TelemetryEvent> load_telemetry_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open telemetry file: " + path);
  std::vector<TelemetryEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    TelemetryEvent e;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "shown") {
      e.kind = TelemetryEvent::Kind::Shown;
    } else if (kind == "accepted") {
      e.kind = TelemetryEvent::Kind::Accepted;
    } else if (kind == "typed_chars") {
      e.kind = TelemetryEvent::Kind::TypedChars;
    } else if (kind == "completed_chars") {
      e.kind = TelemetryEvent::Kind::CompletedChars;
    } else {
      throw std::runtime_error("telemetry line " + std::to_string(lineno) +
                               ": unknown kind '" + kind + "'");
    }
    e.count = j.value("count", std::int64_t{0});
    e.timestamp = j.value("timestamp", std::int64_t{0});
    e.session = j.value("session", std::string{});
    events.push_back(std::move(e));
  }
  return events;
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("cohen_kappa: need two equal-length vectors of size >= 2");
  }
  std::map<int, std::size_t> cat;
  for (int v : a) cat.emplace(v, cat.size());
  for (int v : b) cat.emplace(v, cat.size());
  const std::size_t k = cat.size();
  std::vector<std::size_t> row(k, 0), col(k, 0);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t ra = cat[a[i]], rb = cat[b[i]];
    ++row[ra];
    ++col[rb];
    if (ra == rb) ++agree;
  }
  const double n = static_cast<double>(a.size());
  double po = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    pe += (static_cast<double>(row[i]) / n) * (static_cast<double>(col[i]) / n);
  }
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

double kappa_agreement(std::span<const double> metric_scores, std::span<const int> human_labels,
                       const KappaBinning& binning) {
  if (metric_scores.size() != human_labels.size() || metric_scores.size() < 2) {
    throw std::invalid_argument("kappa_agreement: need equal-length vectors of size >= 2");
  }
  std::vector<int> binned(metric_scores.size());
  for (std::size_t i = 0; i < metric_scores.size(); ++i) {
    int bin = 0;
    for (double cut : binning.cuts) {
      if (metric_scores[i] >= cut) ++bin;
    }
    binned[i] = bin;
  }
  return cohen_kappa(binned, human_labels);
}

}  // namespace fimkit::metrics
