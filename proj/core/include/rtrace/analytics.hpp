#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtrace/domain.hpp"
#include "rtrace/embedding.hpp"
#include "rtrace/stats.hpp"
#include "rtrace/trace_parser.hpp"

namespace rtrace {

inline constexpr double kDefaultTau = 0.94;

/// One agent pair in one round of one segment discussion.
struct PairComparison {
  std::string segment_id;
  std::string run_id;
  Round round = Round::round1;
  double temperature = 0.0;
  std::pair<PersonaId, PersonaId> agent_pair{PersonaId::coder_a, PersonaId::coder_b};
  std::pair<std::uint64_t, std::uint64_t> turn_ids{0, 0};
  double cs = 0.0;
  // Codes addressed in both traces, in codebook order.
  std::vector<std::pair<std::string, double>> per_code_cs;
  bool label_agreement = false;
  Quadrant quadrant = Quadrant::WithinAlign;
  // True when either side lacked a reasoning trace and explanations were compared.
  bool degraded = false;

  std::optional<double> code_cs(std::string_view code) const;
  friend bool operator==(const PairComparison&, const PairComparison&) = default;
};

json to_json(const PairComparison& p);
PairComparison pair_comparison_from_json(const json& j);

struct PairContext {
  std::string segment_id;
  std::string run_id;
  double temperature = 0.0;
};

/// Embeds both reasoning traces (explanations when a trace is missing) and
/// classifies the pair. Errors: SegmentMismatch, embedding errors.
PairComparison compare_pair(const ParsedTurn& a, const ParsedTurn& b, const Codebook& cb, EmbeddingProvider& provider,
                            double tau, const PairContext& context);

/// Re-derives every quadrant under a different threshold.
std::vector<PairComparison> reclassify(std::span<const PairComparison> pairs, double tau);

/// Copy sorted by (segment_id, run_id, temperature, round); every aggregate
/// reduces in this order so results do not depend on input order.
std::vector<PairComparison> canonical_order(std::span<const PairComparison> pairs);

struct QuadrantCell {
  Quadrant quadrant = Quadrant::WithinAlign;
  std::size_t count = 0;
  double proportion = 0.0;
  std::optional<double> mean_cs;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

struct QuadrantSummary {
  std::array<QuadrantCell, 4> cells;  // kAllQuadrants order
  std::size_t total = 0;

  const QuadrantCell& cell(Quadrant q) const;
};

/// Counts, proportions, and mean cs with a normal-approximation 95% CI per quadrant.
QuadrantSummary summarize_quadrants(std::span<const PairComparison> pairs);
json to_json(const QuadrantSummary& s);

struct GroupStats {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

struct ValidationStats {
  stats::RankCorrelation rho;
  stats::WelchResult welch;
  GroupStats agreement;
  GroupStats disagreement;
};

/// rho of cs against label agreement plus Welch's t and Cohen's d between the
/// agreement and disagreement groups.
ValidationStats validation_stats(std::span<const PairComparison> pairs, const stats::BootstrapOptions& bootstrap = {});
json to_json(const ValidationStats& v);

struct CodeDistribution {
  std::string code;
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> sd;
  std::optional<double> median;
  std::array<std::size_t, 50> histogram{};  // 50 equal bins over [0, 1]
  std::optional<double> reference_kappa;
};

std::vector<CodeDistribution> distribution_by_code(std::span<const PairComparison> pairs, const Codebook& cb);
json to_json(const CodeDistribution& d);

struct BoxStats {
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;   // smallest value >= q1 - 1.5 IQR
  double whisker_high = 0.0;  // largest value <= q3 + 1.5 IQR
};

BoxStats box_stats(std::span<const double> values);

struct TemperatureCell {
  double temperature = 0.0;
  bool agreement = false;
  BoxStats box;
};

/// Box-plot statistics per (temperature, agreement) cell, temperatures ascending,
/// disagreement before agreement. Empty cells are omitted.
std::vector<TemperatureCell> temperature_summary(std::span<const PairComparison> pairs);
json to_json(const TemperatureCell& c);

enum class ThresholdMode { fixed, otsu };

/// fixed: returns `fixed_tau` (must lie in (0,1)); otsu: data-driven split.
double select_threshold(std::span<const double> cs_values, ThresholdMode mode, double fixed_tau = kDefaultTau);

struct ReportOptions {
  double tau = kDefaultTau;
  ThresholdMode threshold_mode = ThresholdMode::fixed;
  bool exclude_degraded = false;
  stats::BootstrapOptions bootstrap;
};

/// Everything `analyze` writes to report.json. Validation statistics that
/// cannot be computed (a group too small, constant input) are reported as an
/// "error" string in place of the numbers.
json analysis_report(std::span<const PairComparison> pairs, const Codebook& cb, const ReportOptions& options);

/// Header plus one row per comparison; per-code columns follow codebook order.
std::string comparisons_csv(std::span<const PairComparison> pairs, const Codebook& cb);

}  // namespace rtrace
