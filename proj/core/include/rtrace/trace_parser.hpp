#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rtrace/domain.hpp"

namespace rtrace {

enum class PersonaId { coder_a, coder_b, consensus };
enum class Round { round1, round2, consensus };

std::string_view to_string(PersonaId p) noexcept;
std::string_view to_string(Round r) noexcept;
PersonaId persona_from_string(std::string_view s);
Round round_from_string(std::string_view s);

/// Recoveries applied while parsing a turn. The vocabulary is closed.
enum class ParseFlag { MissingThinkBlock, RecoveredTrailingComma, SingleQuoteMap, ProseAroundMap };
std::string_view to_string(ParseFlag f) noexcept;
ParseFlag parse_flag_from_string(std::string_view s);

struct TurnMeta {
  std::uint64_t turn_id = 0;
  PersonaId agent = PersonaId::coder_a;
  Round round = Round::round1;
};

struct ParsedTurn {
  std::uint64_t turn_id = 0;
  PersonaId agent = PersonaId::coder_a;
  Round round = Round::round1;
  std::string reasoning;
  std::string explanation;
  DecisionMap decision;
  std::set<ParseFlag> parse_flags;

  bool degraded() const noexcept { return parse_flags.count(ParseFlag::MissingThinkBlock) != 0; }
  friend bool operator==(const ParsedTurn&, const ParsedTurn&) = default;
};

struct ParseOptions {
  // When false, a missing <think>...</think> pair is an error instead of a flag.
  bool allow_degraded = true;
};

/// Splits raw agent output into reasoning (first think block), explanation
/// (prose between the think block and the decision map) and the decision map
/// (last well-formed brace map with quoted keys and 0/1/true/false values).
ParsedTurn parse_turn(std::string_view raw, const Codebook& cb, const TurnMeta& meta,
                      const ParseOptions& options = {});

/// Canonical raw form of a turn; parse_turn(serialize_turn(t)) recovers t's decision.
std::string serialize_turn(const ParsedTurn& turn);

json to_json(const ParsedTurn& turn);
ParsedTurn parsed_turn_from_json(const json& j, const Codebook& cb);

enum class Polarity { supports, rejects, uncertain };
std::string_view to_string(Polarity p) noexcept;

struct ReasoningUnit {
  std::string code_name;
  std::size_t start = 0;  // byte offsets into the reasoning string, [start, end)
  std::size_t end = 0;
  Polarity polarity = Polarity::supports;

  std::string_view span(std::string_view reasoning) const { return reasoning.substr(start, end - start); }
  friend bool operator==(const ReasoningUnit&, const ReasoningUnit&) = default;
};

/// Code-addressed spans of a reasoning trace, ordered and non-overlapping.
std::vector<ReasoningUnit> extract_reasoning_units(std::string_view reasoning, const Codebook& cb);

/// negation > hedge > supports
Polarity classify_polarity(std::string_view span);

json to_json(const ReasoningUnit& unit);

}  // namespace rtrace
