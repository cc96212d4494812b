#include "rtrace/store_triage.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <random>
#include <set>

#include "rtrace/error.hpp"
#include "rtrace/io.hpp"
#include "rtrace/stats.hpp"

namespace rtrace {

std::string_view to_string(CaseReason r) noexcept {
  switch (r) {
    case CaseReason::within_misalign_band: return "within_misalign_band";
    case CaseReason::between_align_band: return "between_align_band";
    case CaseReason::manual: return "manual";
  }
  return "manual";
}

std::string_view to_string(CaseStatus s) noexcept {
  switch (s) {
    case CaseStatus::open: return "open";
    case CaseStatus::adjudicated: return "adjudicated";
    case CaseStatus::skipped: return "skipped";
  }
  return "open";
}

CaseReason case_reason_from_string(std::string_view s) {
  for (auto r : {CaseReason::within_misalign_band, CaseReason::between_align_band, CaseReason::manual})
    if (to_string(r) == s) return r;
  throw Error(Errc::MalformedDocument, "unknown case reason '" + std::string(s) + "'");
}

CaseStatus case_status_from_string(std::string_view s) {
  for (auto st : {CaseStatus::open, CaseStatus::adjudicated, CaseStatus::skipped})
    if (to_string(st) == s) return st;
  throw Error(Errc::MalformedDocument, "unknown case status '" + std::string(s) + "'");
}

json to_json(const TriageCase& c) {
  return json{{"schema", "case/v1"},
              {"case_id", c.case_id},
              {"reason", to_string(c.reason)},
              {"stratum_code", c.stratum_code},
              {"priority", c.priority},
              {"status", to_string(c.status)},
              {"seed", c.seed},
              {"pair", to_json(c.pair)},
              {"turn_a", to_json(c.turn_a)},
              {"turn_b", to_json(c.turn_b)}};
}

TriageCase triage_case_from_json(const json& j, const Codebook& cb) {
  try {
    TriageCase c;
    c.case_id = j.at("case_id").get<std::string>();
    c.reason = case_reason_from_string(j.at("reason").get<std::string>());
    c.stratum_code = j.value("stratum_code", std::string{});
    c.priority = j.at("priority").get<double>();
    c.status = case_status_from_string(j.at("status").get<std::string>());
    c.seed = j.value("seed", std::uint64_t{0});
    c.pair = pair_comparison_from_json(j.at("pair"));
    c.turn_a = parsed_turn_from_json(j.at("turn_a"), cb);
    c.turn_b = parsed_turn_from_json(j.at("turn_b"), cb);
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::StoreFailure, std::string("case record: ") + e.what());
  }
}

json to_json(const Adjudication& a) {
  return json{{"schema", "adjudication/v1"},
              {"case_id", a.case_id},
              {"reviewer", a.reviewer},
              {"resolved_decision", to_json(a.resolved_decision)},
              {"codebook_note", a.codebook_note},
              {"created_at", a.created_at}};
}

Adjudication adjudication_from_json(const json& j, const Codebook& cb) {
  try {
    Adjudication a;
    a.case_id = j.at("case_id").get<std::string>();
    a.reviewer = j.value("reviewer", std::string{});
    a.resolved_decision = decision_from_json(j.at("resolved_decision"), cb);
    a.codebook_note = j.value("codebook_note", std::string{});
    a.created_at = j.value("created_at", std::string{});
    return a;
  } catch (const json::exception& e) {
    throw Error(Errc::StoreFailure, std::string("adjudication record: ") + e.what());
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void validate_band(const Band& band) {
  if (!(band.low >= 0.0 && band.high <= 1.0 && band.low < band.high))
    throw Error(Errc::PreconditionFailed,
                "band must satisfy 0 <= low < high <= 1, got [" + std::to_string(band.low) + ", " +
                    std::to_string(band.high) + "]");
}

double prioritize(const TriageCase& c, double tau) {
  switch (c.reason) {
    case CaseReason::between_align_band: return 2.0;
    case CaseReason::within_misalign_band: return 1.0 + (tau - c.pair.cs);
    case CaseReason::manual: return 0.0;
  }
  return 0.0;
}

json to_json(const AdjudicationSummary& s) {
  return json{{"open", s.open},
              {"adjudicated", s.adjudicated},
              {"skipped", s.skipped},
              {"compared", s.compared},
              {"human_agent_agreement", s.human_agent_agreement ? json(*s.human_agent_agreement) : json(nullptr)}};
}

namespace {

std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    out.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : '_');
  }
  return out;
}

std::string pair_key(const PairComparison& p) {
  return slug(p.segment_id) + "-" + std::string(to_string(p.round)) + "-t" + json(p.temperature).dump();
}

// Partial Fisher-Yates: the first k entries of a seeded shuffle.
template <typename T>
std::vector<T> draw_without_replacement(std::vector<T> pool, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + stats::uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

TriageCase make_case(const PairComparison& p, const TurnLookup& turns, CaseReason reason, std::string case_id,
                     std::uint64_t seed, double tau) {
  const ParsedTurn* a = turns(p.turn_ids.first);
  const ParsedTurn* b = turns(p.turn_ids.second);
  if (!a || !b) throw Error(Errc::StoreFailure, "missing turns for comparison " + pair_key(p));
  TriageCase c;
  c.case_id = std::move(case_id);
  c.pair = p;
  c.turn_a = *a;
  c.turn_b = *b;
  c.reason = reason;
  c.seed = seed;
  c.priority = prioritize(c, tau);
  return c;
}

}  // namespace

SampleResult sample_within_misalign(std::span<const PairComparison> input, const TurnLookup& turns, const Codebook& cb,
                                    const WithinMisalignOptions& options) {
  validate_band(options.band);
  const auto pairs = canonical_order(input);
  std::mt19937_64 rng(options.seed);
  SampleResult result;
  for (const auto& code : cb.codes()) {
    const bool excluded = std::any_of(options.exclude_codes.begin(), options.exclude_codes.end(),
                                      [&](const std::string& e) { return text::iequals(text::trim(e), code.name); });
    if (excluded) continue;
    std::vector<const PairComparison*> eligible;
    for (const auto& p : pairs) {
      if (p.quadrant != Quadrant::WithinMisalign || !options.band.contains(p.cs)) continue;
      const ParsedTurn* a = turns(p.turn_ids.first);
      if (a && a->decision.get(code.name) == 1) eligible.push_back(&p);
    }
    auto chosen = draw_without_replacement(eligible, options.k_per_code, rng);
    if (chosen.size() < options.k_per_code)
      result.shortfalls.push_back({code.name, options.k_per_code, eligible.size()});
    for (const auto* p : chosen) {
      result.cases.push_back(make_case(*p, turns, CaseReason::within_misalign_band,
                                       "wm-" + slug(code.name) + "-" + pair_key(*p), options.seed, options.tau));
      result.cases.back().stratum_code = code.name;
    }
  }
  return result;
}

SampleResult sample_between_align(std::span<const PairComparison> input, const TurnLookup& turns,
                                  const BetweenAlignOptions& options) {
  validate_band(options.band);
  const auto pairs = canonical_order(input);
  std::vector<const PairComparison*> eligible;
  for (const auto& p : pairs) {
    if (p.quadrant == Quadrant::BetweenAlign && options.band.contains(p.cs)) eligible.push_back(&p);
  }
  std::mt19937_64 rng(options.seed);
  auto chosen = draw_without_replacement(eligible, options.n, rng);
  SampleResult result;
  if (chosen.size() < options.n) result.shortfalls.push_back({"", options.n, eligible.size()});
  for (const auto* p : chosen)
    result.cases.push_back(
        make_case(*p, turns, CaseReason::between_align_band, "ba-" + pair_key(*p), options.seed, options.tau));
  return result;
}

// ---------------------------------------------------------------------------

RunStore::RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::StoreFailure, "cannot create " + dir_.string() + ": " + ec.message());
}

json RunStore::read_json(std::string_view file) const {
  const auto p = path(file);
  json doc = json::parse(io::read_file(p), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::StoreFailure, "invalid JSON in " + p.string());
  return doc;
}

void RunStore::write_json(std::string_view file, const json& doc) {
  std::lock_guard lock(writer_);
  io::atomic_write(path(file), doc.dump(2) + "\n");
}

std::vector<json> RunStore::read_records(std::string_view file) const { return io::read_jsonl(path(file)); }

void RunStore::write_records(std::string_view file, const std::vector<json>& records) {
  std::lock_guard lock(writer_);
  io::write_jsonl(path(file), records);
}

std::vector<Segment> RunStore::segments() const {
  std::vector<Segment> out;
  for (const auto& j : read_records("segments.jsonl")) out.push_back(segment_from_json(j));
  return out;
}

std::vector<PairComparison> RunStore::comparisons() const {
  std::vector<PairComparison> out;
  for (const auto& j : read_records("comparisons.jsonl")) out.push_back(pair_comparison_from_json(j));
  return out;
}

std::map<std::uint64_t, ParsedTurn> RunStore::parsed_turns(const Codebook& cb) const {
  std::map<std::uint64_t, ParsedTurn> out;
  for (const auto& j : read_records("turns.jsonl")) {
    if (!j.contains("parsed") || j["parsed"].is_null()) continue;
    auto t = parsed_turn_from_json(j["parsed"], cb);
    out.emplace(t.turn_id, std::move(t));
  }
  return out;
}

std::vector<TriageCase> RunStore::cases(const Codebook& cb) const {
  std::vector<TriageCase> out;
  for (const auto& j : read_records("cases.jsonl")) out.push_back(triage_case_from_json(j, cb));
  return out;
}

std::vector<Adjudication> RunStore::adjudications(const Codebook& cb) const {
  std::vector<Adjudication> out;
  for (const auto& j : read_records("adjudications.jsonl")) out.push_back(adjudication_from_json(j, cb));
  return out;
}

std::size_t RunStore::add_cases(const std::vector<TriageCase>& fresh) {
  std::lock_guard lock(writer_);
  auto records = io::read_jsonl(path("cases.jsonl"));
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.at("case_id").get<std::string>());
  std::size_t added = 0;
  for (const auto& c : fresh) {
    if (!ids.insert(c.case_id).second) continue;
    records.push_back(to_json(c));
    ++added;
  }
  io::write_jsonl(path("cases.jsonl"), records);
  return added;
}

namespace {

json* find_case(std::vector<json>& records, const std::string& case_id) {
  for (auto& r : records) {
    if (r.at("case_id").get<std::string>() == case_id) return &r;
  }
  return nullptr;
}

}  // namespace

TriageCase RunStore::adjudicate(const std::string& case_id, const std::string& reviewer, const json& resolved,
                                const std::string& note, const Codebook& cb) {
  std::lock_guard lock(writer_);
  auto records = io::read_jsonl(path("cases.jsonl"));
  json* record = find_case(records, case_id);
  if (!record) throw Error(Errc::CaseNotFound, case_id);

  for (const auto& a : io::read_jsonl(path("adjudications.jsonl"))) {
    if (a.value("case_id", std::string{}) == case_id)
      throw Error(Errc::AlreadyResolved, case_id + " by " + a.value("reviewer", std::string{"unknown"}));
  }
  if ((*record)["status"] != "open") throw Error(Errc::AlreadyResolved, case_id + " is " + (*record)["status"].get<std::string>());

  Adjudication adj;
  adj.case_id = case_id;
  adj.reviewer = reviewer;
  adj.codebook_note = note;
  adj.created_at = utc_timestamp();
  try {
    adj.resolved_decision = decision_from_json(resolved, cb);
  } catch (const Error& e) {
    throw Error(Errc::InvalidDecision, e.detail());
  }

  io::append_jsonl(path("adjudications.jsonl"), to_json(adj));
  (*record)["status"] = to_string(CaseStatus::adjudicated);
  io::write_jsonl(path("cases.jsonl"), records);
  return triage_case_from_json(*record, cb);
}

TriageCase RunStore::skip(const std::string& case_id, const Codebook& cb) {
  std::lock_guard lock(writer_);
  auto records = io::read_jsonl(path("cases.jsonl"));
  json* record = find_case(records, case_id);
  if (!record) throw Error(Errc::CaseNotFound, case_id);
  if ((*record)["status"] != "open") throw Error(Errc::AlreadyResolved, case_id + " is " + (*record)["status"].get<std::string>());
  (*record)["status"] = to_string(CaseStatus::skipped);
  io::write_jsonl(path("cases.jsonl"), records);
  return triage_case_from_json(*record, cb);
}

AdjudicationSummary RunStore::adjudication_summary(const Codebook& cb) const {
  AdjudicationSummary s;
  const auto all_cases = cases(cb);
  for (const auto& c : all_cases) {
    switch (c.status) {
      case CaseStatus::open: ++s.open; break;
      case CaseStatus::adjudicated: ++s.adjudicated; break;
      case CaseStatus::skipped: ++s.skipped; break;
    }
  }
  std::map<std::pair<std::string, double>, DecisionMap> finals;
  for (const auto& d : read_records("discussions.jsonl")) {
    if (d.value("schema", std::string{}) != "discussion/v1") continue;
    finals[{d.at("segment_id").get<std::string>(), d.at("temperature").get<double>()}] =
        decision_from_json(d.at("final_decision"), cb);
  }
  std::size_t agree = 0;
  for (const auto& a : adjudications(cb)) {
    auto c = std::find_if(all_cases.begin(), all_cases.end(), [&](const TriageCase& x) { return x.case_id == a.case_id; });
    if (c == all_cases.end()) continue;
    auto f = finals.find({c->pair.segment_id, c->pair.temperature});
    if (f == finals.end()) continue;
    ++s.compared;
    if (f->second == a.resolved_decision) ++agree;
  }
  if (s.compared > 0) s.human_agent_agreement = static_cast<double>(agree) / static_cast<double>(s.compared);
  return s;
}

}  // namespace rtrace
