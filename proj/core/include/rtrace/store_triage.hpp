#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtrace/analytics.hpp"
#include "rtrace/domain.hpp"
#include "rtrace/trace_parser.hpp"

namespace rtrace {

enum class CaseReason { within_misalign_band, between_align_band, manual };
enum class CaseStatus { open, adjudicated, skipped };

std::string_view to_string(CaseReason r) noexcept;
std::string_view to_string(CaseStatus s) noexcept;
CaseReason case_reason_from_string(std::string_view s);
CaseStatus case_status_from_string(std::string_view s);

struct TriageCase {
  std::string case_id;
  PairComparison pair;
  ParsedTurn turn_a;
  ParsedTurn turn_b;
  CaseReason reason = CaseReason::manual;
  std::string stratum_code;  // code the case was drawn for (within-misalign only)
  double priority = 0.0;
  CaseStatus status = CaseStatus::open;
  std::uint64_t seed = 0;
};

json to_json(const TriageCase& c);
TriageCase triage_case_from_json(const json& j, const Codebook& cb);

struct Adjudication {
  std::string case_id;
  std::string reviewer;
  DecisionMap resolved_decision;
  std::string codebook_note;
  std::string created_at;  // ISO-8601 UTC
};

json to_json(const Adjudication& a);
Adjudication adjudication_from_json(const json& j, const Codebook& cb);
std::string utc_timestamp();

struct Band {
  double low = 0.0;
  double high = 1.0;
  bool contains(double v) const noexcept { return v >= low && v <= high; }
};

/// Throws PreconditionFailed unless 0 <= low < high <= 1.
void validate_band(const Band& band);

/// 2.0 for between-align, 1 + (tau - cs) for within-misalign, 0 for manual.
double prioritize(const TriageCase& c, double tau);

using TurnLookup = std::function<const ParsedTurn*(std::uint64_t turn_id)>;

struct Shortfall {
  std::string code;  // empty for between-align
  std::size_t requested = 0;
  std::size_t available = 0;
};

struct SampleResult {
  std::vector<TriageCase> cases;
  std::vector<Shortfall> shortfalls;
};

struct WithinMisalignOptions {
  std::size_t k_per_code = 15;
  Band band{0.55, 0.78};
  std::uint64_t seed = 7;
  double tau = kDefaultTau;
  std::vector<std::string> exclude_codes;
};

/// Per code (codebook order): WithinMisalign pairs in the band whose agreed
/// decision sets the code to 1, sampled uniformly without replacement.
SampleResult sample_within_misalign(std::span<const PairComparison> pairs, const TurnLookup& turns, const Codebook& cb,
                                    const WithinMisalignOptions& options);

struct BetweenAlignOptions {
  std::size_t n = 45;
  Band band{0.95, 0.99};
  std::uint64_t seed = 7;
  double tau = kDefaultTau;
};

SampleResult sample_between_align(std::span<const PairComparison> pairs, const TurnLookup& turns,
                                  const BetweenAlignOptions& options);

/// Counts for the review loop. Agreement compares each adjudication with the
/// final agent decision of the same segment and temperature.
struct AdjudicationSummary {
  std::size_t open = 0;
  std::size_t adjudicated = 0;
  std::size_t skipped = 0;
  std::size_t compared = 0;
  std::optional<double> human_agent_agreement;
};

json to_json(const AdjudicationSummary& s);

/// A run directory:
///   config.json manifest.json segments.jsonl turns.jsonl discussions.jsonl
///   comparisons.jsonl embeddings.bin cases.jsonl adjudications.jsonl
/// Writes go through one mutex; whole-file writes are write-then-rename.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path path(std::string_view file) const { return dir_ / std::string(file); }

  json read_json(std::string_view file) const;
  void write_json(std::string_view file, const json& doc);
  std::vector<json> read_records(std::string_view file) const;
  void write_records(std::string_view file, const std::vector<json>& records);

  std::vector<Segment> segments() const;
  std::vector<PairComparison> comparisons() const;
  /// Parsed turns keyed by turn id (turns that failed to parse are absent).
  std::map<std::uint64_t, ParsedTurn> parsed_turns(const Codebook& cb) const;

  std::vector<TriageCase> cases(const Codebook& cb) const;
  std::vector<Adjudication> adjudications(const Codebook& cb) const;

  /// Adds cases whose id is not present yet; returns how many were added.
  std::size_t add_cases(const std::vector<TriageCase>& cases);

  /// Errors: CaseNotFound, AlreadyResolved, InvalidDecision.
  TriageCase adjudicate(const std::string& case_id, const std::string& reviewer, const json& resolved_decision,
                        const std::string& note, const Codebook& cb);
  TriageCase skip(const std::string& case_id, const Codebook& cb);

  AdjudicationSummary adjudication_summary(const Codebook& cb) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex writer_;
};

}  // namespace rtrace
