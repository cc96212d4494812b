#include "rtrace/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "rtrace/error.hpp"

namespace rtrace {

std::optional<double> PairComparison::code_cs(std::string_view code) const {
  for (const auto& [name, v] : per_code_cs) {
    if (name == code) return v;
  }
  return std::nullopt;
}

json to_json(const PairComparison& p) {
  json per_code = json::object();
  for (const auto& [name, v] : p.per_code_cs) per_code[name] = v;
  return json{{"schema", "comparison/v1"},
              {"segment_id", p.segment_id},
              {"run_id", p.run_id},
              {"round", to_string(p.round)},
              {"temperature", p.temperature},
              {"agent_pair", {to_string(p.agent_pair.first), to_string(p.agent_pair.second)}},
              {"turn_ids", {p.turn_ids.first, p.turn_ids.second}},
              {"cs", p.cs},
              {"per_code_cs", std::move(per_code)},
              {"label_agreement", p.label_agreement},
              {"quadrant", to_string(p.quadrant)},
              {"degraded", p.degraded}};
}

PairComparison pair_comparison_from_json(const json& j) {
  try {
    PairComparison p;
    p.segment_id = j.at("segment_id").get<std::string>();
    p.run_id = j.at("run_id").get<std::string>();
    p.round = round_from_string(j.at("round").get<std::string>());
    p.temperature = j.at("temperature").get<double>();
    const auto& agents = j.at("agent_pair");
    p.agent_pair = {persona_from_string(agents.at(0).get<std::string>()),
                    persona_from_string(agents.at(1).get<std::string>())};
    const auto& ids = j.at("turn_ids");
    p.turn_ids = {ids.at(0).get<std::uint64_t>(), ids.at(1).get<std::uint64_t>()};
    p.cs = j.at("cs").get<double>();
    for (const auto& [k, v] : j.at("per_code_cs").items()) p.per_code_cs.emplace_back(k, v.get<double>());
    p.label_agreement = j.at("label_agreement").get<bool>();
    p.quadrant = quadrant_from_string(j.at("quadrant").get<std::string>());
    p.degraded = j.value("degraded", false);
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDocument, std::string("comparison record: ") + e.what());
  }
}

namespace {

const std::string& comparable_text(const ParsedTurn& t) { return t.degraded() ? t.explanation : t.reasoning; }

std::string code_text(std::string_view reasoning, const std::vector<ReasoningUnit>& units, const std::string& code) {
  std::string out;
  for (const auto& u : units) {
    if (u.code_name != code) continue;
    if (!out.empty()) out += "\n";
    out += u.span(reasoning);
  }
  return out;
}

}  // namespace

PairComparison compare_pair(const ParsedTurn& a, const ParsedTurn& b, const Codebook& cb, EmbeddingProvider& provider,
                            double tau, const PairContext& context) {
  if (a.round != b.round)
    throw Error(Errc::SegmentMismatch, "turns " + std::to_string(a.turn_id) + " and " + std::to_string(b.turn_id) +
                                           " are from different rounds");
  PairComparison p;
  p.segment_id = context.segment_id;
  p.run_id = context.run_id;
  p.temperature = context.temperature;
  p.round = a.round;
  p.agent_pair = {a.agent, b.agent};
  p.turn_ids = {a.turn_id, b.turn_id};
  p.degraded = a.degraded() || b.degraded();

  const auto ea = provider.embed(comparable_text(a));
  const auto eb = provider.embed(comparable_text(b));
  p.cs = cosine(ea.vector, eb.vector);
  p.label_agreement = a.decision == b.decision;
  p.quadrant = classify_quadrant(p.label_agreement, p.cs, tau);

  if (!p.degraded) {
    const auto ua = extract_reasoning_units(a.reasoning, cb);
    const auto ub = extract_reasoning_units(b.reasoning, cb);
    for (const auto& code : cb.codes()) {
      const auto ta = code_text(a.reasoning, ua, code.name);
      const auto tb = code_text(b.reasoning, ub, code.name);
      if (ta.empty() || tb.empty()) continue;
      try {
        p.per_code_cs.emplace_back(code.name, cosine(provider.embed(ta).vector, provider.embed(tb).vector));
      } catch (const Error& e) {
        // A span made only of punctuation has nothing to embed.
        if (e.code() != Errc::EmptyText) throw;
      }
    }
  }
  return p;
}

std::vector<PairComparison> reclassify(std::span<const PairComparison> pairs, double tau) {
  std::vector<PairComparison> out(pairs.begin(), pairs.end());
  for (auto& p : out) p.quadrant = classify_quadrant(p.label_agreement, p.cs, tau);
  return out;
}

std::vector<PairComparison> canonical_order(std::span<const PairComparison> pairs) {
  std::vector<PairComparison> out(pairs.begin(), pairs.end());
  std::stable_sort(out.begin(), out.end(), [](const PairComparison& x, const PairComparison& y) {
    return std::tie(x.segment_id, x.run_id, x.temperature, x.round, x.cs) <
           std::tie(y.segment_id, y.run_id, y.temperature, y.round, y.cs);
  });
  return out;
}

const QuadrantCell& QuadrantSummary::cell(Quadrant q) const {
  for (const auto& c : cells) {
    if (c.quadrant == q) return c;
  }
  return cells[0];
}

QuadrantSummary summarize_quadrants(std::span<const PairComparison> input) {
  if (input.empty()) throw Error(Errc::EmptyInput, "no comparisons to summarize");
  const auto pairs = canonical_order(input);
  QuadrantSummary s;
  s.total = pairs.size();
  for (std::size_t i = 0; i < 4; ++i) {
    const Quadrant q = kAllQuadrants[i];
    std::vector<double> cs;
    for (const auto& p : pairs) {
      if (p.quadrant == q) cs.push_back(p.cs);
    }
    QuadrantCell& c = s.cells[i];
    c.quadrant = q;
    c.count = cs.size();
    c.proportion = static_cast<double>(cs.size()) / static_cast<double>(s.total);
    if (!cs.empty()) {
      const double m = stats::mean(cs);
      const double half = 1.96 * stats::sample_sd(cs) / std::sqrt(static_cast<double>(cs.size()));
      c.mean_cs = m;
      c.ci_low = m - half;
      c.ci_high = m + half;
    }
  }
  return s;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const QuadrantSummary& s) {
  json cells = json::array();
  for (const auto& c : s.cells) {
    cells.push_back({{"quadrant", to_string(c.quadrant)},
                     {"count", c.count},
                     {"proportion", c.proportion},
                     {"mean_cs", opt(c.mean_cs)},
                     {"ci_low", opt(c.ci_low)},
                     {"ci_high", opt(c.ci_high)}});
  }
  return json{{"total", s.total}, {"quadrants", std::move(cells)}};
}

ValidationStats validation_stats(std::span<const PairComparison> input, const stats::BootstrapOptions& bootstrap) {
  const auto pairs = canonical_order(input);
  std::vector<double> cs, agree_cs, disagree_cs;
  std::vector<int> agreement;
  for (const auto& p : pairs) {
    cs.push_back(p.cs);
    agreement.push_back(p.label_agreement ? 1 : 0);
    (p.label_agreement ? agree_cs : disagree_cs).push_back(p.cs);
  }
  ValidationStats v;
  v.rho = stats::rank_correlation(cs, agreement, bootstrap);
  v.welch = stats::welch_test(agree_cs, disagree_cs);
  v.agreement = {stats::mean(agree_cs), stats::sample_sd(agree_cs), agree_cs.size()};
  v.disagreement = {stats::mean(disagree_cs), stats::sample_sd(disagree_cs), disagree_cs.size()};
  return v;
}

json to_json(const ValidationStats& v) {
  auto group = [](const GroupStats& g) { return json{{"mean", g.mean}, {"sd", g.sd}, {"n", g.n}}; };
  return json{{"rho", v.rho.rho},
              {"rho_ci", {v.rho.ci_low, v.rho.ci_high}},
              {"bootstrap", {{"resamples", v.rho.resamples}, {"seed", v.rho.seed}}},
              {"welch_t", v.welch.t},
              {"welch_df", v.welch.df},
              {"p_value", v.welch.p},
              {"cohens_d", v.welch.cohens_d},
              {"agreement", group(v.agreement)},
              {"disagreement", group(v.disagreement)}};
}

std::vector<CodeDistribution> distribution_by_code(std::span<const PairComparison> input, const Codebook& cb) {
  const auto pairs = canonical_order(input);
  std::vector<CodeDistribution> out;
  for (const auto& code : cb.codes()) {
    CodeDistribution d;
    d.code = code.name;
    d.reference_kappa = code.reference_kappa;
    std::vector<double> values;
    for (const auto& p : pairs) {
      if (auto v = p.code_cs(code.name)) values.push_back(*v);
    }
    d.n = values.size();
    if (!values.empty()) {
      d.mean = stats::mean(values);
      d.sd = stats::sample_sd(values);
      d.median = stats::quantile(values, 0.5);
      for (double v : values) {
        auto k = static_cast<long long>(std::floor(v * 50.0));
        d.histogram[static_cast<std::size_t>(std::clamp<long long>(k, 0, 49))] += 1;
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

json to_json(const CodeDistribution& d) {
  return json{{"code", d.code},
              {"n", d.n},
              {"mean", opt(d.mean)},
              {"sd", opt(d.sd)},
              {"median", opt(d.median)},
              {"bins", {{"low", 0.0}, {"high", 1.0}, {"count", 50}}},
              {"histogram", d.histogram},
              {"reference_kappa", opt(d.reference_kappa)}};
}

BoxStats box_stats(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "box statistics of no values");
  BoxStats b;
  b.n = values.size();
  b.median = stats::quantile(values, 0.5);
  b.q1 = stats::quantile(values, 0.25);
  b.q3 = stats::quantile(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double v : values) {
    if (v >= lo_fence) b.whisker_low = std::min(b.whisker_low, v);
    if (v <= hi_fence) b.whisker_high = std::max(b.whisker_high, v);
  }
  return b;
}

std::vector<TemperatureCell> temperature_summary(std::span<const PairComparison> input) {
  const auto pairs = canonical_order(input);
  std::map<std::pair<double, bool>, std::vector<double>> cells;
  for (const auto& p : pairs) cells[{p.temperature, p.label_agreement}].push_back(p.cs);
  std::vector<TemperatureCell> out;
  for (const auto& [key, values] : cells) out.push_back({key.first, key.second, box_stats(values)});
  return out;
}

json to_json(const TemperatureCell& c) {
  return json{{"temperature", c.temperature},
              {"group", c.agreement ? "agreement" : "disagreement"},
              {"n", c.box.n},
              {"median", c.box.median},
              {"q1", c.box.q1},
              {"q3", c.box.q3},
              {"whisker_low", c.box.whisker_low},
              {"whisker_high", c.box.whisker_high}};
}

double select_threshold(std::span<const double> cs_values, ThresholdMode mode, double fixed_tau) {
  if (mode == ThresholdMode::fixed) {
    if (!(fixed_tau > 0.0 && fixed_tau < 1.0))
      throw Error(Errc::PreconditionFailed, "fixed tau must lie in (0,1), got " + std::to_string(fixed_tau));
    return fixed_tau;
  }
  return stats::otsu_threshold(cs_values, 1000);
}

json analysis_report(std::span<const PairComparison> input, const Codebook& cb, const ReportOptions& options) {
  std::vector<PairComparison> pairs;
  std::size_t excluded = 0;
  for (const auto& p : input) {
    if (options.exclude_degraded && p.degraded) {
      ++excluded;
      continue;
    }
    pairs.push_back(p);
  }
  pairs = canonical_order(pairs);
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no comparisons to analyze");

  std::vector<double> cs;
  for (const auto& p : pairs) cs.push_back(p.cs);
  const double tau = select_threshold(cs, options.threshold_mode, options.tau);
  pairs = reclassify(pairs, tau);

  json report;
  report["schema"] = "report/v1";
  report["threshold"] = {{"mode", options.threshold_mode == ThresholdMode::fixed ? "fixed" : "otsu"}, {"tau", tau}};
  report["pairs"] = {{"total", pairs.size()}, {"excluded_degraded", excluded}};
  report["quadrants"] = to_json(summarize_quadrants(pairs));
  try {
    report["validation"] = to_json(validation_stats(pairs, options.bootstrap));
  } catch (const Error& e) {
    report["validation"] = {{"error", e.what()}};
  }
  json codes = json::array();
  for (const auto& d : distribution_by_code(pairs, cb)) codes.push_back(to_json(d));
  report["codes"] = std::move(codes);
  json temps = json::array();
  for (const auto& c : temperature_summary(pairs)) temps.push_back(to_json(c));
  report["temperatures"] = std::move(temps);
  return report;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) { return json(v).dump(); }

}  // namespace

std::string comparisons_csv(std::span<const PairComparison> input, const Codebook& cb) {
  const auto pairs = canonical_order(input);
  std::string out = "segment_id,run_id,round,temperature,cs,label_agreement,quadrant";
  for (const auto& c : cb.codes()) out += "," + csv_field("cs:" + c.name);
  out += "\n";
  for (const auto& p : pairs) {
    out += csv_field(p.segment_id) + "," + csv_field(p.run_id) + "," + std::string(to_string(p.round)) + "," +
           num(p.temperature) + "," + num(p.cs) + "," + (p.label_agreement ? "1" : "0") + "," +
           std::string(to_string(p.quadrant));
    for (const auto& c : cb.codes()) {
      out += ",";
      if (auto v = p.code_cs(c.name)) out += num(*v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace rtrace
