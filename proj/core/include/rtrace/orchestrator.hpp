#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtrace/domain.hpp"
#include "rtrace/error.hpp"
#include "rtrace/llm_gateway.hpp"
#include "rtrace/trace_parser.hpp"

namespace rtrace {

enum class Outcome { round1_consensus, round2_consensus, arbitrated };
std::string_view to_string(Outcome o) noexcept;
Outcome outcome_from_string(std::string_view s);

/// A model output exactly as received, before any parsing.
struct RawTurn {
  std::uint64_t turn_id = 0;
  PersonaId agent = PersonaId::coder_a;
  Round round = Round::round1;
  std::string request_key;
  std::string raw_text;
  std::string backend_id;
  friend bool operator==(const RawTurn&, const RawTurn&) = default;
};

struct SegmentDiscussion {
  std::string segment_id;
  std::string run_id;
  double temperature = 0.0;
  std::vector<RawTurn> raw_turns;
  std::vector<ParsedTurn> turns;  // 2, 4 or 5
  DecisionMap final_decision;
  Outcome outcome = Outcome::round1_consensus;

  friend bool operator==(const SegmentDiscussion&, const SegmentDiscussion&) = default;
};

struct SegmentFailure {
  std::string segment_id;
  std::string run_id;
  double temperature = 0.0;
  Errc error = Errc::TurnParseFailure;
  std::string message;
  std::vector<RawTurn> raw_turns;  // whatever was received before the failure
};

/// Thrown by run_segment; carries the raw turns received so far.
class SegmentError : public Error {
 public:
  SegmentError(Errc code, const std::string& detail, std::vector<RawTurn> raw_turns)
      : Error(code, detail), raw_turns_(std::move(raw_turns)) {}
  const std::vector<RawTurn>& raw_turns() const noexcept { return raw_turns_; }

 private:
  std::vector<RawTurn> raw_turns_;
};

struct ProtocolConfig {
  std::string run_id;
  PersonaSet personas;
  double temperature = 0.0;
  int max_output_tokens = 4096;
  std::optional<std::int64_t> run_seed;
  ParseOptions parse;
};

/// Round 1 independent coding; Round 2 critique when the full decision maps
/// differ; a single consensus turn when Round 2 still differs. turn_id_base
/// numbers the turns base+1 ... base+5.
SegmentDiscussion run_segment(const Segment& seg, const Codebook& cb, LlmBackend& backend,
                              const ProtocolConfig& config, std::uint64_t turn_id_base = 0);

struct CorpusConfig {
  ProtocolConfig protocol;
  std::vector<double> temperatures{0.0};
  int parallelism = 4;
};

struct CorpusProgress {
  std::size_t done = 0;
  std::size_t total = 0;
  std::size_t failures = 0;
};

struct RunRecords {
  std::vector<SegmentDiscussion> discussions;  // sorted by (segment_id, temperature)
  std::vector<SegmentFailure> failures;        // same order
};

/// Every segment at every temperature, with bounded parallelism and
/// per-segment failure isolation. Turn ids depend only on the segment's rank
/// by id and the temperature index. Errors: PreconditionFailed (empty input or
/// duplicate ids).
RunRecords run_corpus(std::span<const Segment> segments, const Codebook& cb, LlmBackend& backend,
                      const CorpusConfig& config, const std::function<void(const CorpusProgress&)>& on_progress = {});

json to_json(const SegmentDiscussion& d);
json to_json(const SegmentFailure& f);
json to_json(const RawTurn& t, const std::string& segment_id, double temperature);

}  // namespace rtrace
