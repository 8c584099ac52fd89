#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fimkit::metrics {

struct MetricResult {
  int em = 0;              // 0 or 1
  double chrf_pp = 0.0;    // [0, 100]
  double kk = 0.0;         // [0, 1]
  int completion_lines = 0;
  int truth_lines = 0;
};

enum class KkDenominator { Max, Completion };

struct MetricConfig {
  bool normalize = true;  // strip trailing blanks per line, outer blank lines
  double kk_tau = 0.8;
  KkDenominator kk_denominator = KkDenominator::Max;
};

// Trailing whitespace removed from every line, leading/trailing blank lines
// dropped, '\n' separators, no final newline.
std::string normalize_completion(std::string_view text);

int exact_match(std::string_view completion, std::string_view truth, bool normalize = true);

// chrF++: character 1..6-grams plus word 1..2-grams, beta = 2, per-order F
// averaged over the orders where either side has n-grams. Identical strings
// score 100; disjoint ones 0; both empty scores 100.
double chrf_pp(std::string_view completion, std::string_view truth);

// Initial run of completion lines (blanks dropped) that fuzzily match some
// ground-truth line at similarity >= tau, over max(#completion, #truth)
// lines. Throws std::invalid_argument unless 0 < tau <= 1.
double kk_score(std::string_view completion, std::string_view truth, double tau = 0.8,
                KkDenominator denom = KkDenominator::Max);

// All three metrics over the same (optionally normalized) strings, so that
// em = 1 implies kk = 1 and chrf_pp = 100.
MetricResult score(std::string_view completion, std::string_view truth,
                   const MetricConfig& config = {});

// (mean completion lines, mean truth lines). Throws on empty input.
std::pair<double, double> mean_lines(std::span<const MetricResult> results);

struct TelemetryEvent {
  enum class Kind { Shown, Accepted, TypedChars, CompletedChars };
  Kind kind = Kind::Shown;
  std::int64_t count = 0;  // character count for TypedChars/CompletedChars
  std::int64_t timestamp = 0;
  std::string session;
};

const char* to_string(TelemetryEvent::Kind k);

// completed / (completed + typed); 0 when no characters were written.
double rocc(std::span<const TelemetryEvent> events);

// accepted / shown; 0 when nothing was shown. Throws std::invalid_argument
// when a session accepts more than it has been shown at any point in time.
double acceptance_rate(std::span<const TelemetryEvent> events);

std::vector<TelemetryEvent> load_telemetry_jsonl(const std::string& path);

// Cohen's kappa between two equal-length ordinal label vectors.
double cohen_kappa(std::span<const int> a, std::span<const int> b);

struct KappaBinning {
  std::vector<double> cuts;  // bin index = number of cuts <= score
};

double kappa_agreement(std::span<const double> metric_scores, std::span<const int> human_labels,
                       const KappaBinning& binning);

}  // namespace fimkit::metrics
