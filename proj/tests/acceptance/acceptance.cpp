// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when all pass.
#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "rtrace/analytics.hpp"
#include "rtrace/embedding.hpp"
#include "rtrace/error.hpp"
#include "rtrace/orchestrator.hpp"
#include "rtrace/pipeline.hpp"
#include "rtrace/stats.hpp"
#include "rtrace/store_triage.hpp"
#include "rtrace/trace_parser.hpp"
#include "support.hpp"

using namespace rtrace;
using testing::codebook8;

namespace {

// Tolerances.
constexpr double kA1ProportionTol = 0.001;  // 0.1 percentage points
constexpr double kA1MeanTol = 0.001;
constexpr double kA1Seconds = 5.0;
constexpr double kA2Tol = 1e-9;
constexpr double kA2RhoTol = 1e-12;
constexpr int kA2Instances = 1000;
constexpr double kA3MinT = 30.0;
constexpr double kA3MaxP = 1e-10;
constexpr double kA3MinRho = 0.3;
constexpr double kA3DTol = 0.05;
constexpr double kA4Tol = 1e-9;
constexpr int kA5FuzzRuns = 10000;
constexpr std::size_t kA5MinFixtures = 20;
constexpr double kA8Seconds = 10.0;

const char* kEmitFlag = "--emit-embedding";
const char* kProbeText = "Greeting: the tutor says hello to the class, so Greeting applies and Instruction does not.";

// Collects failed checks; a criterion passes when none failed.
struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class Fn>
void guarded(Check& c, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    c.expect(false, std::string("unexpected exception: ") + e.what());
  }
}

// A1 ---------------------------------------------------------------------

Check a1_quadrant_fixture() {
  Check c;
  guarded(c, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto pairs = testing::quadrant_fixture();
    const auto s = summarize_quadrants(pairs);
    const double elapsed = seconds_since(t0);
    struct Target {
      Quadrant q;
      std::size_t count;
      double proportion;
      double mean;
    };
    const Target targets[] = {{Quadrant::WithinAlign, 4598, 0.47, 0.965},
                              {Quadrant::BetweenMisalign, 2680, 0.28, 0.863},
                              {Quadrant::WithinMisalign, 2193, 0.23, 0.916},
                              {Quadrant::BetweenAlign, 275, 0.03, 0.954}};
    for (const auto& t : targets) {
      const auto& cell = s.cell(t.q);
      const std::string name(to_string(t.q));
      c.expect(cell.count == t.count, name + " count " + std::to_string(cell.count));
      c.expect(std::abs(cell.proportion - t.proportion) <= kA1ProportionTol,
               name + " proportion " + fmt(100 * cell.proportion, 4) + "% vs " + fmt(100 * t.proportion, 3) + "%");
      c.expect(cell.mean_cs && std::abs(*cell.mean_cs - t.mean) <= kA1MeanTol, name + " mean");
    }
    c.expect(elapsed < kA1Seconds, "runtime " + fmt(elapsed) + " s");
    c.note("n=" + std::to_string(s.total) + ", " + fmt(elapsed, 3) + " s");
  });
  return c;
}

// A2 ---------------------------------------------------------------------

// Average ranks by counting, independent of any sort.
std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Check a2_statistics_oracles() {
  Check c;
  guarded(c, [&] {
    const std::vector<double> a = {1, 2, 3}, b = {2, 4, 6};
    const auto w = stats::welch_test(a, b);
    const double t = -2.0 / std::sqrt(5.0 / 3.0);
    const double df = 50.0 / 17.0;
    const double d = -2.0 / std::sqrt(2.5);
    const double p = 2 * boost::math::cdf(boost::math::students_t(df), -std::abs(t));
    c.expect(std::abs(w.t - t) <= kA2Tol, "welch t " + fmt(w.t, 12));
    c.expect(std::abs(w.df - df) <= kA2Tol, "welch df " + fmt(w.df, 12));
    c.expect(std::abs(w.cohens_d - d) <= kA2Tol, "cohen d " + fmt(w.cohens_d, 12));
    c.expect(std::abs(w.p - p) <= kA2Tol, "p " + fmt(w.p, 12) + " vs " + fmt(p, 12));

    std::mt19937_64 rng(42);
    int checked = 0;
    for (int i = 0; checked < kA2Instances; ++i) {
      const std::size_t n = 3 + rng() % 18;
      std::vector<double> x(n), y(n);
      const bool binary = i % 2 == 0;
      const int levels = 2 + static_cast<int>(rng() % 6);  // coarse values force ties
      for (std::size_t k = 0; k < n; ++k) {
        x[k] = static_cast<double>(rng() % levels) / levels;
        y[k] = binary ? static_cast<double>(rng() % 2) : static_cast<double>(rng() % 10);
      }
      const auto rx = brute_ranks(x), ry = brute_ranks(y);
      if (brute_ranks(x) == std::vector<double>(n, rx[0]) || ry == std::vector<double>(n, ry[0])) continue;
      ++checked;
      if (stats::average_ranks(x) != rx) {
        c.expect(false, "rank mismatch at instance " + std::to_string(i));
        break;
      }
      const double oracle = brute_pearson(rx, ry);
      double got = stats::spearman(x, y);
      if (binary) {
        std::vector<int> agree(y.begin(), y.end());
        got = stats::rank_correlation(x, agree, {20, 1, 0.95}).rho;
      }
      if (std::abs(got - oracle) > kA2RhoTol) {
        c.expect(false, "rho mismatch at instance " + std::to_string(i) + ": " + fmt(got, 15) + " vs " +
                            fmt(oracle, 15));
        break;
      }
    }
    c.note(std::to_string(checked) + " rank instances");
  });
  return c;
}

// A3 ---------------------------------------------------------------------

Check a3_directional_validation() {
  Check c;
  guarded(c, [&] {
    std::mt19937_64 rng(9746);
    std::normal_distribution<double> agree(0.957, 0.025), disagree(0.904, 0.058);
    std::vector<double> ga(6791), gd(2955);
    for (auto& v : ga) v = agree(rng);
    for (auto& v : gd) v = disagree(rng);

    const auto w = stats::welch_test(ga, gd);
    std::vector<double> cs = ga;
    cs.insert(cs.end(), gd.begin(), gd.end());
    std::vector<int> labels(ga.size(), 1);
    labels.insert(labels.end(), gd.size(), 0);
    const auto rho = stats::rank_correlation(cs, labels);

    // Analytic pooled-SD d from the realized samples, computed here independently.
    auto moments = [](const std::vector<double>& x) {
      long double m = 0;
      for (double v : x) m += v;
      m /= x.size();
      long double ss = 0;
      for (double v : x) ss += (v - m) * (v - m);
      return std::pair<double, double>{static_cast<double>(m), static_cast<double>(ss / (x.size() - 1))};
    };
    const auto [ma, va] = moments(ga);
    const auto [md, vd] = moments(gd);
    const double na = ga.size(), nd = gd.size();
    const double pooled = std::sqrt(((na - 1) * va + (nd - 1) * vd) / (na + nd - 2));
    const double d_analytic = (ma - md) / pooled;

    c.expect(w.t > kA3MinT, "t " + fmt(w.t));
    c.expect(w.p < kA3MaxP, "p " + fmt(w.p));
    c.expect(rho.rho > kA3MinRho, "rho " + fmt(rho.rho));
    c.expect(std::abs(w.cohens_d - d_analytic) <= kA3DTol, "d " + fmt(w.cohens_d) + " vs " + fmt(d_analytic));
    c.note("t=" + fmt(w.t, 4) + " df=" + fmt(w.df, 5) + " rho=" + fmt(rho.rho, 3) + " [" + fmt(rho.ci_low, 3) + ", " +
           fmt(rho.ci_high, 3) + "] d=" + fmt(w.cohens_d, 4));
  });
  return c;
}

// A4 ---------------------------------------------------------------------

std::string embedding_hex() {
  HashedBagProvider provider;
  const auto v = provider.embed(kProbeText).vector.values;
  std::ostringstream out;
  for (float f : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    out << std::hex << std::setw(8) << std::setfill('0') << bits;
  }
  return out.str();
}

std::string run_self(const std::string& self) {
  std::string out;
  FILE* p = popen((self + " " + kEmitFlag).c_str(), "r");
  if (!p) return out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  pclose(p);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out;
}

Check a4_embedding_properties(const std::string& self) {
  Check c;
  guarded(c, [&] {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    for (int i = 0; i < 500; ++i) {
      const std::size_t n = 1 + rng() % 768;
      std::vector<double> u(n), v(n), su(n), nu(n);
      const double scale = std::exp(g(rng) * 5);
      for (std::size_t k = 0; k < n; ++k) {
        u[k] = g(rng);
        v[k] = g(rng);
        su[k] = u[k] * scale;
        nu[k] = -u[k] * 3;
      }
      const double uv = cosine(u, v);
      if (std::abs(cosine(u, u) - 1.0) > kA4Tol) c.expect(false, "identity");
      if (uv != cosine(v, u)) c.expect(false, "symmetry");
      if (std::abs(cosine(su, v) - uv) > kA4Tol) c.expect(false, "scale invariance");
      const double anti = cosine(u, nu), par = cosine(u, su);
      if (!(uv >= -1 && uv <= 1 && anti >= -1 && par <= 1)) c.expect(false, "range");
      if (!c.failures.empty()) break;
    }

    const auto here = embedding_hex();
    const auto there = run_self(self);
    c.expect(!there.empty() && here == there, "embedding bits differ across processes");
    const auto again = run_self(self);
    c.expect(there == again, "embedding bits differ between child processes");

    HashedBagProvider provider(256, 512);
    std::string text, first512;
    for (int i = 0; i < 600; ++i) {
      const std::string w = "w" + std::to_string(i);
      text += (i ? " " : "") + w;
      if (i < 512) first512 += (i ? " " : "") + w;
    }
    const auto r = provider.embed(text);
    c.expect(r.truncated, "truncation flag not set");
    c.expect(r.token_count == 600, "token count " + std::to_string(r.token_count));
    c.expect(r.vector == provider.embed(first512).vector, "600-token input differs from its first 512 tokens");
    c.expect(!provider.embed(first512).truncated, "512 tokens flagged as truncated");
    std::ostringstream digest;
    digest << std::hex << std::hash<std::string>{}(here);
    c.note("two-process digest " + digest.str());
  });
  return c;
}

// A5 ---------------------------------------------------------------------

Check a5_parser_corpus() {
  Check c;
  guarded(c, [&] {
    const auto dir = testing::test_data_dir() / "parser";
    const auto golden = json::parse(testing::read_bytes(dir / "golden.json"));
    c.expect(golden.size() >= kA5MinFixtures, "only " + std::to_string(golden.size()) + " fixtures");
    for (const auto& [file, spec] : golden.items()) {
      const auto raw = testing::read_bytes(dir / file);
      const TurnMeta m{1, persona_from_string(spec["agent"].get<std::string>()),
                       round_from_string(spec["round"].get<std::string>())};
      const auto& expect = spec["expect"];
      try {
        const auto t = parse_turn(raw, codebook8(), m);
        if (expect.contains("error")) {
          c.expect(false, file + ": parsed, expected " + expect["error"].get<std::string>());
          continue;
        }
        std::set<std::string> flags, want;
        for (auto f : t.parse_flags) flags.emplace(to_string(f));
        for (const auto& f : expect["flags"]) want.insert(f.get<std::string>());
        c.expect(t.decision.positives() == expect["positives"].get<std::vector<std::string>>(), file + ": decision");
        c.expect(flags == want, file + ": flags");
        if (expect.contains("reasoning"))
          c.expect(t.reasoning == expect["reasoning"].get<std::string>(), file + ": reasoning");
        if (expect.contains("explanation"))
          c.expect(t.explanation == expect["explanation"].get<std::string>(), file + ": explanation");
      } catch (const Error& e) {
        c.expect(expect.contains("error") && errc_name(e.code()) == expect["error"].get<std::string>(),
                 file + ": " + e.what());
      }
    }

    std::mt19937_64 rng(777);
    int crashes = 0;
    for (int i = 0; i < kA5FuzzRuns; ++i) {
      std::string s(rng() % 256, '\0');
      for (auto& ch : s) ch = static_cast<char>(rng() % 256);
      if (i % 5 == 0) s = "<think>" + s + "</think>{'Greeting': 1,}";
      try {
        (void)parse_turn(s, codebook8(), {});
      } catch (const Error&) {
      } catch (...) {
        ++crashes;
      }
    }
    c.expect(crashes == 0, std::to_string(crashes) + " fuzz crashes");
    c.note(std::to_string(golden.size()) + " fixtures, " + std::to_string(kA5FuzzRuns) + " fuzz inputs");
  });
  return c;
}

// A6 ---------------------------------------------------------------------

DecisionMap decision_of(const std::set<std::string>& positives) {
  std::map<std::string, int> raw;
  for (const auto& p : positives) raw[p] = 1;
  return normalize_decision(raw, codebook8());
}

Check a6_protocol_and_replay() {
  Check c;
  guarded(c, [&] {
    ProtocolConfig cfg;
    cfg.run_id = "acceptance";
    cfg.personas = testing::bundled_personas();
    const Segment seg{"s", "s", Speaker::tutor, "Hello, everyone!", 0};
    using CS = testing::CodeSet;

    ScriptedBackend two(testing::script_segment("s", 0, {"Greeting"}, {"Greeting"}));
    const auto d2 = run_segment(seg, codebook8(), two, cfg);
    c.expect(d2.outcome == Outcome::round1_consensus && d2.turns.size() == 2 &&
                 d2.final_decision == decision_of({"Greeting"}),
             "round1_consensus");

    ScriptedBackend four(testing::script_segment("s", 0, {"Greeting"}, {"Instruction"}, std::pair{CS{"Greeting"}, CS{"Greeting"}}));
    const auto d4 = run_segment(seg, codebook8(), four, cfg);
    c.expect(d4.outcome == Outcome::round2_consensus && d4.turns.size() == 4 &&
                 d4.final_decision == decision_of({"Greeting"}),
             "round2_consensus");

    ScriptedBackend five(testing::script_segment("s", 0, {"Greeting"}, {"Encouragement"},
                                                 std::pair{CS{"Greeting"}, CS{"Encouragement"}}, CS{"Instruction"}));
    const auto d5 = run_segment(seg, codebook8(), five, cfg);
    c.expect(d5.outcome == Outcome::arbitrated && d5.turns.size() == 5 &&
                 d5.final_decision == decision_of({"Instruction"}),
             "arbitrated");

    testing::TempDir tmp("rtrace-a6");
    testing::demo_run(tmp.path());
    replay_run(tmp.path());
    const auto first = testing::read_bytes(tmp.path() / "comparisons.jsonl");
    replay_run(tmp.path());
    const auto second = testing::read_bytes(tmp.path() / "comparisons.jsonl");
    c.expect(!first.empty() && first == second, "replayed comparisons.jsonl differs");
    c.note("comparisons.jsonl " + std::to_string(first.size()) + " bytes, identical across replays");
  });
  return c;
}

// A7 ---------------------------------------------------------------------

Check a7_sampling() {
  Check c;
  guarded(c, [&] {
    const auto f = testing::sampling_fixture(25, 80);
    const TurnLookup lookup = [&f](std::uint64_t id) { return f.lookup(id); };
    WithinMisalignOptions wo;
    wo.k_per_code = 15;
    wo.band = {0.55, 0.78};
    BetweenAlignOptions bo;
    bo.n = 45;
    bo.band = {0.95, 0.99};
    const auto wm = sample_within_misalign(f.pairs, lookup, codebook8(), wo);
    const auto ba = sample_between_align(f.pairs, lookup, bo);
    c.expect(wm.cases.size() == 120, "within-misalign " + std::to_string(wm.cases.size()));
    c.expect(ba.cases.size() == 45, "between-align " + std::to_string(ba.cases.size()));

    auto ids = [](const SampleResult& r) {
      std::vector<std::string> out;
      for (const auto& x : r.cases) out.push_back(x.case_id);
      return out;
    };
    c.expect(ids(wm) == ids(sample_within_misalign(f.pairs, lookup, codebook8(), wo)), "within-misalign not reproducible");
    c.expect(ids(ba) == ids(sample_between_align(f.pairs, lookup, bo)), "between-align not reproducible");
    for (const auto& x : wm.cases)
      c.expect(x.pair.quadrant == Quadrant::WithinMisalign && wo.band.contains(x.pair.cs), x.case_id + " predicate");
    for (const auto& x : ba.cases)
      c.expect(x.pair.quadrant == Quadrant::BetweenAlign && bo.band.contains(x.pair.cs), x.case_id + " predicate");
    const auto all = ids(wm);
    c.expect(std::set<std::string>(all.begin(), all.end()).size() == all.size(), "duplicate case ids");
  });
  return c;
}

// A8 ---------------------------------------------------------------------

Check a8_temperature_and_end_to_end() {
  Check c;
  guarded(c, [&] {
    testing::TempDir tmp("rtrace-a8");
    testing::demo_run(tmp.path());
    const auto pairs = RunStore(tmp.path()).comparisons();

    const auto cells = temperature_summary(pairs);
    std::map<double, std::pair<double, double>> medians;  // temperature -> (disagree, agree)
    for (const auto& cell : cells)
      (cell.agreement ? medians[cell.temperature].second : medians[cell.temperature].first) = cell.box.median;
    c.expect(medians.size() == 3, std::to_string(medians.size()) + " temperatures");
    std::string summary;
    for (const auto& [t, m] : medians) {
      c.expect(m.second > m.first, "t=" + fmt(t) + ": agreement median " + fmt(m.second) + " <= " + fmt(m.first));
      summary += " t=" + fmt(t, 2) + ":" + fmt(m.second, 3) + ">" + fmt(m.first, 3);
    }

    // Relabeling: the same pair set under each temperature label.
    std::vector<PairComparison> relabeled;
    for (double t : {0.0, 0.5, 1.0}) {
      for (auto p : pairs) {
        p.temperature = t;
        relabeled.push_back(p);
      }
    }
    const auto rcells = temperature_summary(relabeled);
    for (const auto& cell : rcells) {
      const auto& ref = rcells[cell.agreement ? 1 : 0];
      c.expect(cell.box.median == ref.box.median, "relabeled median changed");
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream out, err;
    const std::string dir = tmp.path().string();
    const std::string report = (tmp.path() / "report").string();
    const char* replay_argv[] = {"rtrace", "replay", "--run", dir.c_str()};
    const char* analyze_argv[] = {"rtrace", "analyze", "--run", dir.c_str(), "--out", report.c_str()};
    const int rc1 = cli::run(4, replay_argv, out, err);
    const int rc2 = cli::run(6, analyze_argv, out, err);
    const double elapsed = seconds_since(t0);
    c.expect(rc1 == 0 && rc2 == 0, "replay/analyze exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2));
    c.expect(elapsed < kA8Seconds, "replay+analyze took " + fmt(elapsed) + " s");
    c.note("medians" + summary + "; replay+analyze " + fmt(elapsed, 3) + " s");
  });
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1 && std::strcmp(argv[1], kEmitFlag) == 0) {
    std::cout << embedding_hex() << "\n";
    return 0;
  }
  const std::string self = std::filesystem::canonical("/proc/self/exe").string();

  struct Criterion {
    const char* id;
    const char* title;
    std::function<Check()> run;
  };
  const Criterion criteria[] = {
      {"A1", "quadrant fixture reproduction", a1_quadrant_fixture},
      {"A2", "statistics oracles", a2_statistics_oracles},
      {"A3", "directional validation", a3_directional_validation},
      {"A4", "cosine and embedding properties", [&] { return a4_embedding_properties(self); }},
      {"A5", "parser corpus and fuzz", a5_parser_corpus},
      {"A6", "protocol state machine and replay", a6_protocol_and_replay},
      {"A7", "triage sampling", a7_sampling},
      {"A8", "temperature robustness and end-to-end timing", a8_temperature_and_end_to_end},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    const Check c = cr.run();
    const bool pass = c.failures.empty();
    failed += pass ? 0 : 1;
    std::cout << cr.id << " " << (pass ? "PASS" : "FAIL") << "  " << cr.title << " (" << fmt(seconds_since(t0), 3)
              << " s)";
    for (const auto& n : c.notes) std::cout << "; " << n;
    for (const auto& f : c.failures) std::cout << "\n     - " << f;
    std::cout << std::endl;
  }
  std::cout << (8 - failed) << "/8 criteria passed\n";
  return failed == 0 ? 0 : 1;
}
