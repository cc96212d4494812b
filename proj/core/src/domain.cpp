#include "rtrace/domain.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "rtrace/error.hpp"

namespace rtrace {

namespace text {

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

}  // namespace text

Codebook::Codebook(std::string version, std::vector<Code> codes)
    : version_(std::move(version)), codes_(std::move(codes)) {
  if (codes_.empty()) throw Error(Errc::EmptyCodebook, "codebook has no codes");
  std::set<std::string> seen;
  for (const auto& c : codes_) {
    const auto key = text::to_lower(text::trim(c.name));
    if (key.empty()) throw Error(Errc::MalformedDocument, "code with empty name");
    if (!seen.insert(key).second) throw Error(Errc::DuplicateCodeName, "\"" + c.name + "\"");
    if (c.reference_kappa && (*c.reference_kappa < 0.0 || *c.reference_kappa > 1.0))
      throw Error(Errc::MalformedDocument, "reference_kappa out of [0,1] for " + c.name);
  }
}

std::vector<std::string> Codebook::names() const {
  std::vector<std::string> out;
  out.reserve(codes_.size());
  for (const auto& c : codes_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> Codebook::find(std::string_view name) const {
  const auto key = text::trim(name);
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (text::iequals(codes_[i].name, key)) return i;
  }
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    for (const auto& a : codes_[i].aliases)
      if (text::iequals(a, key)) return i;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> string_list(const json& j, const std::string& where) {
  std::vector<std::string> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw Error(Errc::MalformedDocument, where + " must be an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string())
      throw Error(Errc::MalformedDocument, where + "[" + std::to_string(i) + "] must be a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

}  // namespace

Codebook load_codebook(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::MalformedDocument, "codebook document must be an object");
  std::string version;
  if (auto it = doc.find("version"); it != doc.end()) {
    if (!it->is_string()) throw Error(Errc::MalformedDocument, "version must be a string");
    version = it->get<std::string>();
  }
  auto codes_it = doc.find("codes");
  if (codes_it == doc.end() || !codes_it->is_array())
    throw Error(Errc::MalformedDocument, "codes must be an array");

  std::vector<Code> codes;
  for (std::size_t i = 0; i < codes_it->size(); ++i) {
    const json& c = (*codes_it)[i];
    const std::string where = "codes[" + std::to_string(i) + "]";
    if (!c.is_object()) throw Error(Errc::MalformedDocument, where + " must be an object");
    auto name = c.find("name");
    if (name == c.end() || !name->is_string())
      throw Error(Errc::MalformedDocument, where + ".name must be a string");
    Code code;
    code.name = text::trim(name->get<std::string>());
    if (code.name.empty()) throw Error(Errc::MalformedDocument, where + ".name is empty");
    if (auto d = c.find("definition"); d != c.end() && !d->is_null()) {
      if (!d->is_string()) throw Error(Errc::MalformedDocument, where + ".definition must be a string");
      code.definition = d->get<std::string>();
    }
    if (auto e = c.find("examples"); e != c.end()) code.examples = string_list(*e, where + ".examples");
    if (auto a = c.find("aliases"); a != c.end()) code.aliases = string_list(*a, where + ".aliases");
    if (auto k = c.find("reference_kappa"); k != c.end() && !k->is_null()) {
      if (!k->is_number()) throw Error(Errc::MalformedDocument, where + ".reference_kappa must be a number");
      code.reference_kappa = k->get<double>();
    }
    codes.push_back(std::move(code));
  }
  return Codebook(std::move(version), std::move(codes));
}

Codebook load_codebook_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MalformedDocument, "cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::MalformedDocument, "invalid JSON in " + path.string());
  return load_codebook(doc);
}

json to_json(const Codebook& cb) {
  json codes = json::array();
  for (const auto& c : cb.codes()) {
    json j;
    j["name"] = c.name;
    j["definition"] = c.definition;
    j["examples"] = c.examples;
    if (!c.aliases.empty()) j["aliases"] = c.aliases;
    j["reference_kappa"] = c.reference_kappa ? json(*c.reference_kappa) : json(nullptr);
    codes.push_back(std::move(j));
  }
  return json{{"version", cb.version()}, {"codes", std::move(codes)}};
}

std::string_view to_string(Speaker s) noexcept {
  switch (s) {
    case Speaker::tutor: return "tutor";
    case Speaker::student: return "student";
    case Speaker::other: return "other";
  }
  return "other";
}

Speaker speaker_from_string(std::string_view s) {
  if (text::iequals(s, "tutor")) return Speaker::tutor;
  if (text::iequals(s, "student")) return Speaker::student;
  if (text::iequals(s, "other")) return Speaker::other;
  throw Error(Errc::MalformedDocument, "unknown speaker '" + std::string(s) + "'");
}

json to_json(const Segment& seg) {
  return json{{"schema", "segment/v1"},
              {"id", seg.id},
              {"session_id", seg.session_id},
              {"speaker", to_string(seg.speaker)},
              {"text", seg.text},
              {"index_in_session", seg.index_in_session}};
}

Segment segment_from_json(const json& j) {
  try {
    Segment s;
    s.id = j.at("id").get<std::string>();
    s.session_id = j.value("session_id", std::string{});
    s.speaker = speaker_from_string(j.value("speaker", std::string{"other"}));
    s.text = j.at("text").get<std::string>();
    s.index_in_session = j.value("index_in_session", 0u);
    if (s.id.empty()) throw Error(Errc::MalformedDocument, "segment with empty id");
    if (text::trim(s.text).empty()) throw Error(Errc::MalformedDocument, "segment " + s.id + " has empty text");
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDocument, std::string("segment record: ") + e.what());
  }
}

std::optional<int> DecisionMap::get(std::string_view code) const {
  for (const auto& [name, v] : entries_) {
    if (text::iequals(name, text::trim(code))) return v;
  }
  return std::nullopt;
}

std::vector<std::string> DecisionMap::positives() const {
  std::vector<std::string> out;
  for (const auto& [name, v] : entries_) {
    if (v == 1) out.push_back(name);
  }
  return out;
}

DecisionMap normalize_decision(const std::vector<DecisionMap::Entry>& raw, const Codebook& cb) {
  std::vector<int> values(cb.size(), 0);
  for (const auto& [key, v] : raw) {
    auto idx = cb.find(key);
    if (!idx) throw Error(Errc::UnknownCode, text::trim(key));
    // Later duplicates win, matching how the map text reads.
    values[*idx] = v != 0 ? 1 : 0;
  }
  DecisionMap out;
  out.entries_.reserve(cb.size());
  for (std::size_t i = 0; i < cb.size(); ++i) out.entries_.emplace_back(cb.at(i).name, values[i]);
  return out;
}

DecisionMap normalize_decision(const std::map<std::string, int>& raw, const Codebook& cb) {
  return normalize_decision(std::vector<DecisionMap::Entry>(raw.begin(), raw.end()), cb);
}

json to_json(const DecisionMap& d) {
  json j = json::object();
  for (const auto& [name, v] : d.entries()) j[name] = v;
  return j;
}

DecisionMap decision_from_json(const json& j, const Codebook& cb) {
  if (!j.is_object()) throw Error(Errc::MalformedDocument, "decision must be an object");
  std::vector<DecisionMap::Entry> raw;
  for (const auto& [k, v] : j.items()) {
    int value = 0;
    if (v.is_boolean()) {
      value = v.get<bool>() ? 1 : 0;
    } else if (v.is_number_integer() && (v.get<long long>() == 0 || v.get<long long>() == 1)) {
      value = static_cast<int>(v.get<long long>());
    } else {
      throw Error(Errc::MalformedDocument, "decision value for '" + k + "' must be 0/1");
    }
    raw.emplace_back(k, value);
  }
  return normalize_decision(raw, cb);
}

std::string_view to_string(Quadrant q) noexcept {
  switch (q) {
    case Quadrant::WithinAlign: return "WithinAlign";
    case Quadrant::WithinMisalign: return "WithinMisalign";
    case Quadrant::BetweenAlign: return "BetweenAlign";
    case Quadrant::BetweenMisalign: return "BetweenMisalign";
  }
  return "WithinAlign";
}

Quadrant quadrant_from_string(std::string_view s) {
  for (Quadrant q : kAllQuadrants) {
    if (to_string(q) == s) return q;
  }
  throw Error(Errc::MalformedDocument, "unknown quadrant '" + std::string(s) + "'");
}

}  // namespace rtrace
