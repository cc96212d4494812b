#include "rtrace/trace_parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include "rtrace/error.hpp"

namespace rtrace {

std::string_view to_string(PersonaId p) noexcept {
  switch (p) {
    case PersonaId::coder_a: return "coder_a";
    case PersonaId::coder_b: return "coder_b";
    case PersonaId::consensus: return "consensus";
  }
  return "coder_a";
}

std::string_view to_string(Round r) noexcept {
  switch (r) {
    case Round::round1: return "round1";
    case Round::round2: return "round2";
    case Round::consensus: return "consensus";
  }
  return "round1";
}

PersonaId persona_from_string(std::string_view s) {
  for (auto p : {PersonaId::coder_a, PersonaId::coder_b, PersonaId::consensus})
    if (to_string(p) == s) return p;
  throw Error(Errc::MalformedDocument, "unknown persona '" + std::string(s) + "'");
}

Round round_from_string(std::string_view s) {
  for (auto r : {Round::round1, Round::round2, Round::consensus})
    if (to_string(r) == s) return r;
  throw Error(Errc::MalformedDocument, "unknown round '" + std::string(s) + "'");
}

std::string_view to_string(ParseFlag f) noexcept {
  switch (f) {
    case ParseFlag::MissingThinkBlock: return "MissingThinkBlock";
    case ParseFlag::RecoveredTrailingComma: return "RecoveredTrailingComma";
    case ParseFlag::SingleQuoteMap: return "SingleQuoteMap";
    case ParseFlag::ProseAroundMap: return "ProseAroundMap";
  }
  return "MissingThinkBlock";
}

ParseFlag parse_flag_from_string(std::string_view s) {
  for (auto f : {ParseFlag::MissingThinkBlock, ParseFlag::RecoveredTrailingComma, ParseFlag::SingleQuoteMap,
                 ParseFlag::ProseAroundMap})
    if (to_string(f) == s) return f;
  throw Error(Errc::MalformedDocument, "unknown parse flag '" + std::string(s) + "'");
}

std::string_view to_string(Polarity p) noexcept {
  switch (p) {
    case Polarity::supports: return "supports";
    case Polarity::rejects: return "rejects";
    case Polarity::uncertain: return "uncertain";
  }
  return "supports";
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from = 0) {
  if (needle.empty() || hay.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    if (text::iequals(hay.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

struct MapMatch {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past '}'
  std::vector<DecisionMap::Entry> entries;
  bool single_quoted = false;
  bool trailing_comma = false;
};

class MapScanner {
 public:
  MapScanner(std::string_view s, std::size_t pos) : s_(s), pos_(pos) {}

  std::optional<MapMatch> scan() {
    MapMatch m;
    m.begin = pos_;
    if (!eat('{')) return std::nullopt;
    for (;;) {
      skip_ws();
      auto key = quoted(m.single_quoted);
      if (!key) return std::nullopt;
      skip_ws();
      if (!eat(':')) return std::nullopt;
      skip_ws();
      auto value = binary_value();
      if (!value) return std::nullopt;
      m.entries.emplace_back(std::move(*key), *value);
      skip_ws();
      if (eat('}')) break;
      if (!eat(',')) return std::nullopt;
      skip_ws();
      if (eat('}')) {
        m.trailing_comma = true;
        break;
      }
    }
    m.end = pos_;
    return m;
  }

 private:
  bool eat(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  std::optional<std::string> quoted(bool& single_quoted) {
    if (pos_ >= s_.size()) return std::nullopt;
    const char q = s_[pos_];
    if (q != '"' && q != '\'') return std::nullopt;
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != q) {
      if (s_[pos_] == '\n' || s_[pos_] == '{' || s_[pos_] == '}') return std::nullopt;
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out.push_back(s_[pos_++]);
    }
    if (!eat(q)) return std::nullopt;
    if (text::trim(out).empty()) return std::nullopt;
    if (q == '\'') single_quoted = true;
    return out;
  }

  std::optional<int> binary_value() {
    auto word_ends_at = [&](std::size_t p) { return p >= s_.size() || !is_word(s_[p]); };
    if (pos_ < s_.size() && (s_[pos_] == '0' || s_[pos_] == '1') && word_ends_at(pos_ + 1) &&
        !(pos_ + 1 < s_.size() && s_[pos_ + 1] == '.')) {
      return s_[pos_++] - '0';
    }
    for (auto [word, v] : {std::pair<std::string_view, int>{"true", 1}, {"false", 0}}) {
      if (s_.size() - pos_ >= word.size() && text::iequals(s_.substr(pos_, word.size()), word) &&
          word_ends_at(pos_ + word.size())) {
        pos_ += word.size();
        return v;
      }
    }
    return std::nullopt;
  }

  std::string_view s_;
  std::size_t pos_;
};

std::optional<MapMatch> last_map(std::string_view s) {
  for (std::size_t p = s.rfind('{'); p != std::string_view::npos; p = p == 0 ? std::string_view::npos : s.rfind('{', p - 1)) {
    if (auto m = MapScanner(s, p).scan()) return m;
  }
  return std::nullopt;
}

// Drops a dangling markdown fence ("```python") left between prose and a map.
std::string clean_explanation(std::string_view s) {
  std::string out = text::trim(s);
  auto fence = out.rfind("```");
  if (fence != std::string::npos) {
    auto tail = std::string_view(out).substr(fence + 3);
    bool word_only = std::all_of(tail.begin(), tail.end(), [](char c) { return is_word(c); });
    if (word_only) out = text::trim(std::string_view(out).substr(0, fence));
  }
  return out;
}

}  // namespace

ParsedTurn parse_turn(std::string_view raw, const Codebook& cb, const TurnMeta& meta, const ParseOptions& options) {
  if (raw.empty()) throw Error(Errc::MissingDecision, "empty turn text");
  ParsedTurn turn;
  turn.turn_id = meta.turn_id;
  turn.agent = meta.agent;
  turn.round = meta.round;
  if (turn.round == Round::consensus && turn.agent != PersonaId::consensus)
    throw Error(Errc::PreconditionFailed, "consensus round requires the consensus agent");

  constexpr std::string_view kOpen = "<think>";
  constexpr std::string_view kClose = "</think>";
  std::optional<std::pair<std::size_t, std::size_t>> think;  // reasoning [begin, end)
  std::size_t after_think = 0;
  if (auto open = ifind(raw, kOpen); open != std::string_view::npos) {
    if (auto close = ifind(raw, kClose, open + kOpen.size()); close != std::string_view::npos) {
      think = {open + kOpen.size(), close};
      after_think = close + kClose.size();
    }
  }

  auto map = last_map(raw);
  if (!map) throw Error(Errc::MissingDecision, "no decision map found");

  if (!think) {
    if (!options.allow_degraded) throw Error(Errc::MissingThinkBlock, "no <think>...</think> pair");
    turn.parse_flags.insert(ParseFlag::MissingThinkBlock);
    turn.explanation = clean_explanation(raw.substr(0, map->begin));
  } else {
    turn.reasoning = text::trim(raw.substr(think->first, think->second - think->first));
    if (map->begin >= after_think)
      turn.explanation = clean_explanation(raw.substr(after_think, map->begin - after_think));
    else
      turn.explanation = clean_explanation(raw.substr(after_think));
  }

  if (map->single_quoted) turn.parse_flags.insert(ParseFlag::SingleQuoteMap);
  if (map->trailing_comma) turn.parse_flags.insert(ParseFlag::RecoveredTrailingComma);
  auto rest = raw.substr(map->end);
  if (std::any_of(rest.begin(), rest.end(), [](char c) { return !is_space(c); }))
    turn.parse_flags.insert(ParseFlag::ProseAroundMap);

  turn.decision = normalize_decision(map->entries, cb);
  return turn;
}

std::string serialize_turn(const ParsedTurn& turn) {
  std::string out;
  if (!turn.degraded()) out += "<think>\n" + turn.reasoning + "\n</think>\n";
  if (!turn.explanation.empty()) out += turn.explanation + "\n";
  out += "{";
  bool first = true;
  for (const auto& [name, v] : turn.decision.entries()) {
    if (!first) out += ", ";
    first = false;
    out += json(name).dump() + ": " + std::to_string(v);
  }
  out += "}";
  return out;
}

json to_json(const ParsedTurn& turn) {
  json flags = json::array();
  for (auto f : turn.parse_flags) flags.push_back(to_string(f));
  return json{{"turn_id", turn.turn_id},
              {"agent", to_string(turn.agent)},
              {"round", to_string(turn.round)},
              {"reasoning", turn.reasoning},
              {"explanation", turn.explanation},
              {"decision", to_json(turn.decision)},
              {"parse_flags", std::move(flags)}};
}

ParsedTurn parsed_turn_from_json(const json& j, const Codebook& cb) {
  try {
    ParsedTurn t;
    t.turn_id = j.at("turn_id").get<std::uint64_t>();
    t.agent = persona_from_string(j.at("agent").get<std::string>());
    t.round = round_from_string(j.at("round").get<std::string>());
    t.reasoning = j.at("reasoning").get<std::string>();
    t.explanation = j.at("explanation").get<std::string>();
    t.decision = decision_from_json(j.at("decision"), cb);
    for (const auto& f : j.at("parse_flags")) t.parse_flags.insert(parse_flag_from_string(f.get<std::string>()));
    return t;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDocument, std::string("turn record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reasoning units

namespace {

struct Mention {
  std::size_t code = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<Mention> find_mentions(std::string_view s, const Codebook& cb) {
  struct Pattern {
    std::string text;
    std::size_t code;
  };
  std::vector<Pattern> patterns;
  for (std::size_t i = 0; i < cb.size(); ++i) {
    patterns.push_back({cb.at(i).name, i});
    for (const auto& a : cb.at(i).aliases) patterns.push_back({a, i});
  }
  std::stable_sort(patterns.begin(), patterns.end(),
                   [](const Pattern& a, const Pattern& b) { return a.text.size() > b.text.size(); });

  std::vector<Mention> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (i > 0 && is_word(s[i - 1])) {
      ++i;
      continue;
    }
    bool matched = false;
    for (const auto& p : patterns) {
      const std::size_t n = p.text.size();
      if (n == 0 || i + n > s.size()) continue;
      if (!text::iequals(s.substr(i, n), p.text)) continue;
      if (i + n < s.size() && is_word(s[i + n])) continue;
      out.push_back({p.code, i, i + n});
      i += n;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return out;
}

bool is_clause_break(char c) { return c == '.' || c == ';' || c == '!' || c == '?' || c == '\n'; }

std::size_t clause_start(std::string_view s, std::size_t pos, std::size_t floor) {
  std::size_t p = pos;
  while (p > floor && !is_clause_break(s[p - 1])) --p;
  return p;
}

std::pair<std::size_t, std::size_t> trim_range(std::string_view s, std::size_t b, std::size_t e) {
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return {b, e};
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_word(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool contains_phrase(const std::vector<std::string>& ws, std::initializer_list<std::string_view> phrase) {
  const std::size_t n = phrase.size();
  if (n == 0 || ws.size() < n) return false;
  for (std::size_t i = 0; i + n <= ws.size(); ++i) {
    std::size_t k = 0;
    for (auto w : phrase) {
      if (ws[i + k] != w) break;
      ++k;
    }
    if (k == n) return true;
  }
  return false;
}

// "Code=0", "Code: 0", "-> 0" style explicit rejections.
bool explicit_zero(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '=' && s[i] != ':' && s[i] != '>') continue;
    std::size_t j = i + 1;
    while (j < s.size() && s[j] == ' ') ++j;
    if (j < s.size() && s[j] == '0' && (j + 1 >= s.size() || (!is_word(s[j + 1]) && s[j + 1] != '.')))
      return true;
  }
  return false;
}

}  // namespace

Polarity classify_polarity(std::string_view span) {
  std::string normalized(span);
  // Typographic apostrophe (U+2019) to ASCII so "doesn’t" tokenizes as one word.
  for (std::size_t p = normalized.find("\xE2\x80\x99"); p != std::string::npos; p = normalized.find("\xE2\x80\x99", p))
    normalized.replace(p, 3, "'");
  auto ws = words(normalized);

  // Hedges phrased with "not" ("not sure") are hedges, not negations.
  bool hedge = contains_phrase(ws, {"not", "sure"}) || contains_phrase(ws, {"not", "certain"}) ||
               contains_phrase(ws, {"not", "clear"});
  std::vector<std::string> masked;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (ws[i] == "not" && i + 1 < ws.size() && (ws[i + 1] == "sure" || ws[i + 1] == "certain" || ws[i + 1] == "clear")) {
      ++i;
      continue;
    }
    masked.push_back(ws[i]);
  }

  static const std::array<std::string_view, 14> kNegations = {"no",      "not",   "none",    "never",  "neither",
                                                              "nor",     "without", "absent", "lacks",  "cannot",
                                                              "doesn't", "isn't", "aren't", "wasn't"};
  bool negation = explicit_zero(span) || contains_phrase(masked, {"but", "wait"});
  for (const auto& w : masked) {
    if (negation) break;
    if (std::find(kNegations.begin(), kNegations.end(), w) != kNegations.end()) negation = true;
    if (w.size() > 3 && w.ends_with("n't")) negation = true;
  }
  if (negation) return Polarity::rejects;

  static const std::array<std::string_view, 12> kHedges = {"might",  "may",     "maybe",   "perhaps",
                                                           "possibly", "unclear", "uncertain", "unsure",
                                                           "arguably", "seems",   "seem",    "ambiguous"};
  for (const auto& w : masked) {
    if (std::find(kHedges.begin(), kHedges.end(), w) != kHedges.end()) hedge = true;
  }
  if (contains_phrase(masked, {"could", "be"}) || contains_phrase(masked, {"could", "fit"}) ||
      contains_phrase(masked, {"could", "also"}))
    hedge = true;
  return hedge ? Polarity::uncertain : Polarity::supports;
}

std::vector<ReasoningUnit> extract_reasoning_units(std::string_view reasoning, const Codebook& cb) {
  auto mentions = find_mentions(reasoning, cb);

  // Consecutive mentions of one code address that code together.
  struct Group {
    std::size_t code;
    std::size_t first_begin;
    std::size_t last_end;
  };
  std::vector<Group> groups;
  for (const auto& m : mentions) {
    if (!groups.empty() && groups.back().code == m.code) {
      groups.back().last_end = m.end;
    } else {
      groups.push_back({m.code, m.begin, m.end});
    }
  }

  std::vector<std::size_t> starts(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::size_t floor = g == 0 ? 0 : groups[g - 1].last_end;
    starts[g] = clause_start(reasoning, groups[g].first_begin, floor);
  }

  std::vector<ReasoningUnit> units;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::size_t end = g + 1 < groups.size() ? starts[g + 1] : reasoning.size();
    auto [b, e] = trim_range(reasoning, starts[g], end);
    if (b >= e) continue;
    ReasoningUnit u;
    u.code_name = cb.at(groups[g].code).name;
    u.start = b;
    u.end = e;
    u.polarity = classify_polarity(reasoning.substr(b, e - b));
    units.push_back(std::move(u));
  }
  return units;
}

json to_json(const ReasoningUnit& unit) {
  return json{{"code", unit.code_name},
              {"start", unit.start},
              {"end", unit.end},
              {"polarity", to_string(unit.polarity)}};
}

}  // namespace rtrace
