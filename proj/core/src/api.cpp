#include "rtrace/api.hpp"

#include <algorithm>
#include <charconv>

#include "rtrace/error.hpp"

namespace rtrace {

namespace {

ApiResponse error_response(int status, std::string_view kind, const std::string& message) {
  return {status, json{{"error", kind}, {"message", message}}};
}

int status_for(Errc e) {
  switch (e) {
    case Errc::CaseNotFound: return 404;
    case Errc::AlreadyResolved: return 409;
    case Errc::InvalidDecision:
    case Errc::UnknownCode: return 422;
    default: return 500;
  }
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    const auto slash = path.find('/');
    auto part = path.substr(0, slash);
    if (!part.empty()) parts.push_back(part);
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return parts;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      int v = 0;
      auto [p, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
      if (ec == std::errc{} && p == s.data() + i + 3) {
        out.push_back(static_cast<char>(v));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

json case_summary(const TriageCase& c) {
  return json{{"case_id", c.case_id},
              {"reason", to_string(c.reason)},
              {"stratum_code", c.stratum_code},
              {"priority", c.priority},
              {"status", to_string(c.status)},
              {"segment_id", c.pair.segment_id},
              {"round", to_string(c.pair.round)},
              {"temperature", c.pair.temperature},
              {"cs", c.pair.cs},
              {"quadrant", to_string(c.pair.quadrant)}};
}

json turn_detail(const ParsedTurn& t, const Codebook& cb) {
  json j = to_json(t);
  json units = json::array();
  for (const auto& u : extract_reasoning_units(t.reasoning, cb)) units.push_back(to_json(u));
  j["reasoning_units"] = std::move(units);
  return j;
}

}  // namespace

ApiService::ApiService(std::filesystem::path run_dir, std::optional<double> tau)
    : store_(std::move(run_dir)), codebook_(load_codebook(store_.read_json("config.json").at("codebook"))) {
  tau_ = tau ? *tau : store_.read_json("config.json").value("tau", kDefaultTau);
}

ApiResponse ApiService::handle(std::string_view method, std::string_view path, const QueryParams& query,
                               std::string_view body) {
  const auto parts = split_path(path);
  try {
    if (parts.size() < 2 || parts[0] != "api") return error_response(404, "NotFound", "no route " + std::string(path));
    if (method == "GET") {
      if (parts.size() == 2 && parts[1] == "manifest") return manifest();
      if (parts.size() == 2 && parts[1] == "stats") return stats();
      if (parts.size() == 2 && parts[1] == "queue") return queue(query);
      // Code names may contain '/', which arrives decoded from some servers.
      if (parts.size() >= 4 && parts[1] == "codes" && parts.back() == "distribution") {
        std::string code;
        for (std::size_t i = 2; i + 1 < parts.size(); ++i) code += (i > 2 ? "/" : "") + percent_decode(parts[i]);
        return distribution(code);
      }
      if (parts.size() == 3 && parts[1] == "cases") return case_detail(percent_decode(parts[2]));
    } else if (method == "POST") {
      if (parts.size() == 4 && parts[1] == "cases" && parts[3] == "adjudication")
        return adjudicate(percent_decode(parts[2]), body);
    }
    return error_response(404, "NotFound", "no route " + std::string(method) + " " + std::string(path));
  } catch (const Error& e) {
    return error_response(status_for(e.code()), errc_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "StoreFailure", e.what());
  }
}

ApiResponse ApiService::manifest() { return {200, store_.read_json("manifest.json")}; }

ApiResponse ApiService::stats() {
  const auto pairs = reclassify(store_.comparisons(), tau_);
  json body = json::object();
  if (pairs.empty()) {
    body["tau"] = tau_;
    body["n_pairs"] = 0;
  } else {
    ReportOptions options;
    options.tau = tau_;
    body = analysis_report(pairs, codebook_, options);
  }
  body["adjudication"] = to_json(store_.adjudication_summary(codebook_));
  return {200, std::move(body)};
}

ApiResponse ApiService::distribution(std::string_view code) {
  const auto index = codebook_.find(code);
  if (!index) return error_response(404, "UnknownCode", "unknown code '" + std::string(code) + "'");
  const auto pairs = store_.comparisons();
  for (const auto& d : distribution_by_code(pairs, codebook_)) {
    if (d.code == codebook_.at(*index).name) return {200, to_json(d)};
  }
  return error_response(404, "UnknownCode", "unknown code '" + std::string(code) + "'");
}

ApiResponse ApiService::queue(const QueryParams& query) {
  CaseStatus status = CaseStatus::open;
  std::size_t limit = 50;
  if (auto it = query.find("status"); it != query.end()) {
    try {
      status = case_status_from_string(it->second);
    } catch (const Error&) {
      return error_response(400, "BadRequest", "status must be open|adjudicated|skipped");
    }
  }
  if (auto it = query.find("limit"); it != query.end()) {
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), limit);
    if (ec != std::errc{} || p != s.data() + s.size())
      return error_response(400, "BadRequest", "limit must be a non-negative integer");
  }

  auto cases = store_.cases(codebook_);
  std::erase_if(cases, [&](const TriageCase& c) { return c.status != status; });
  std::sort(cases.begin(), cases.end(), [](const TriageCase& a, const TriageCase& b) {
    if (a.priority != b.priority) return a.priority > b.priority;
    return a.case_id < b.case_id;
  });
  json items = json::array();
  for (std::size_t i = 0; i < cases.size() && i < limit; ++i) items.push_back(case_summary(cases[i]));
  return {200, json{{"status", to_string(status)}, {"total", cases.size()}, {"items", std::move(items)}}};
}

ApiResponse ApiService::case_detail(const std::string& case_id) {
  for (const auto& c : store_.cases(codebook_)) {
    if (c.case_id != case_id) continue;
    json body = to_json(c);
    body["turn_a"] = turn_detail(c.turn_a, codebook_);
    body["turn_b"] = turn_detail(c.turn_b, codebook_);
    for (const auto& s : store_.segments()) {
      if (s.id == c.pair.segment_id) body["segment"] = to_json(s);
    }
    json adjudications = json::array();
    for (const auto& a : store_.adjudications(codebook_)) {
      if (a.case_id == case_id) adjudications.push_back(to_json(a));
    }
    body["adjudications"] = std::move(adjudications);
    return {200, std::move(body)};
  }
  return error_response(404, "CaseNotFound", "no case '" + case_id + "'");
}

ApiResponse ApiService::adjudicate(const std::string& case_id, std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return error_response(422, "InvalidDecision", "body must be a JSON object");
  json fields = json::array();
  if (!j.contains("reviewer") || !j["reviewer"].is_string() || text::trim(j["reviewer"].get<std::string>()).empty())
    fields.push_back("reviewer");
  if (!j.contains("resolved_decision") || !j["resolved_decision"].is_object()) fields.push_back("resolved_decision");
  if (j.contains("codebook_note") && !j["codebook_note"].is_string()) fields.push_back("codebook_note");
  if (!fields.empty()) {
    auto r = error_response(422, "InvalidDecision", "invalid or missing fields");
    r.body["fields"] = std::move(fields);
    return r;
  }
  try {
    const auto updated = store_.adjudicate(case_id, j["reviewer"].get<std::string>(), j["resolved_decision"],
                                           j.value("codebook_note", std::string{}), codebook_);
    return {200, to_json(updated)};
  } catch (const Error& e) {
    auto r = error_response(status_for(e.code()), errc_name(e.code()), e.what());
    if (e.code() == Errc::InvalidDecision || e.code() == Errc::UnknownCode)
      r.body["fields"] = json::array({"resolved_decision"});
    return r;
  }
}

}  // namespace rtrace
