#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace rtrace {

using json = nlohmann::ordered_json;

struct Code {
  std::string name;
  std::string definition;
  std::vector<std::string> examples;
  // Abbreviations that count as a mention of this code in reasoning text.
  std::vector<std::string> aliases;
  std::optional<double> reference_kappa;
};

/// Ordered, immutable set of code definitions. Names are unique.
class Codebook {
 public:
  Codebook(std::string version, std::vector<Code> codes);

  const std::string& version() const noexcept { return version_; }
  const std::vector<Code>& codes() const noexcept { return codes_; }
  std::size_t size() const noexcept { return codes_.size(); }
  std::vector<std::string> names() const;

  // Case-insensitive, whitespace-trimmed lookup against code names only.
  std::optional<std::size_t> find(std::string_view name) const;
  const Code& at(std::size_t index) const { return codes_.at(index); }

 private:
  std::string version_;
  std::vector<Code> codes_;
};

Codebook load_codebook(const json& document);
Codebook load_codebook_file(const std::filesystem::path& path);
json to_json(const Codebook& cb);

enum class Speaker { tutor, student, other };

struct Segment {
  std::string id;
  std::string session_id;
  Speaker speaker = Speaker::other;
  std::string text;
  std::uint32_t index_in_session = 0;
};

std::string_view to_string(Speaker s) noexcept;
Speaker speaker_from_string(std::string_view s);
json to_json(const Segment& seg);
Segment segment_from_json(const json& j);

/// Binary assignment for every code in a codebook, in codebook order.
class DecisionMap {
 public:
  using Entry = std::pair<std::string, int>;

  DecisionMap() = default;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::optional<int> get(std::string_view code) const;
  std::vector<std::string> positives() const;

  friend bool operator==(const DecisionMap&, const DecisionMap&) = default;

 private:
  friend DecisionMap normalize_decision(const std::vector<Entry>&, const Codebook&);
  std::vector<Entry> entries_;
};

/// Fills absent codes with 0 and orders keys by the codebook. Keys match
/// code names case-insensitively after trimming; unmatched keys raise
/// Errc::UnknownCode.
DecisionMap normalize_decision(const std::vector<DecisionMap::Entry>& raw, const Codebook& cb);
DecisionMap normalize_decision(const std::map<std::string, int>& raw, const Codebook& cb);

json to_json(const DecisionMap& d);
DecisionMap decision_from_json(const json& j, const Codebook& cb);

enum class Quadrant { WithinAlign, WithinMisalign, BetweenAlign, BetweenMisalign };
inline constexpr Quadrant kAllQuadrants[] = {Quadrant::WithinAlign, Quadrant::BetweenMisalign,
                                             Quadrant::WithinMisalign, Quadrant::BetweenAlign};

std::string_view to_string(Quadrant q) noexcept;
Quadrant quadrant_from_string(std::string_view s);

/// Same labels and cs >= tau is WithinAlign; the other three cells follow.
constexpr Quadrant classify_quadrant(bool label_agreement, double cs, double tau) noexcept {
  const bool aligned = cs >= tau;
  if (label_agreement) return aligned ? Quadrant::WithinAlign : Quadrant::WithinMisalign;
  return aligned ? Quadrant::BetweenAlign : Quadrant::BetweenMisalign;
}

namespace text {
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;
}  // namespace text

}  // namespace rtrace
