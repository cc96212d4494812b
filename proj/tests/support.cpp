#include "support.hpp"

#include <fstream>
#include <sstream>

namespace testing {

std::filesystem::path source_dir() { return RTRACE_SOURCE_DIR; }
std::filesystem::path test_data_dir() { return source_dir() / "tests" / "data"; }

const rtrace::Codebook& codebook8() {
  static const rtrace::Codebook cb = rtrace::load_codebook_file(source_dir() / "data" / "codebook.json");
  return cb;
}

TempDir::TempDir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  do {
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rng()));
  } while (std::filesystem::exists(path_));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string raw_turn(const std::set<std::string>& positive, const std::string& reasoning,
                     const std::string& explanation) {
  rtrace::json map = rtrace::json::object();
  for (const auto& name : codebook8().names()) map[name] = positive.count(name) ? 1 : 0;
  std::string text = reasoning;
  if (text.empty()) {
    for (const auto& name : codebook8().names())
      text += name + (positive.count(name) ? " applies here. " : " does not apply. ");
  }
  return "<think>" + text + "</think>\n" + explanation + "\n" + map.dump();
}

rtrace::PairComparison make_pair(const std::string& segment_id, double cs, bool agree, double tau,
                                 double temperature, rtrace::Round round) {
  rtrace::PairComparison p;
  p.segment_id = segment_id;
  p.run_id = "fixture";
  p.round = round;
  p.temperature = temperature;
  p.cs = cs;
  p.label_agreement = agree;
  p.quadrant = rtrace::classify_quadrant(agree, cs, tau);
  return p;
}

rtrace::ParsedTurn make_turn(std::uint64_t id, rtrace::PersonaId agent, const std::set<std::string>& positive,
                             rtrace::Round round) {
  std::map<std::string, int> raw;
  for (const auto& c : positive) raw[c] = 1;
  rtrace::ParsedTurn t;
  t.turn_id = id;
  t.agent = agent;
  t.round = round;
  t.reasoning = "reasoning for turn " + std::to_string(id);
  t.explanation = "explanation";
  t.decision = rtrace::normalize_decision(raw, codebook8());
  return t;
}

SamplingFixture sampling_fixture(std::size_t per_code, std::size_t between, std::uint64_t seed) {
  SamplingFixture f;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mid(0.56, 0.77);
  std::uniform_real_distribution<double> high(0.951, 0.989);
  std::uint64_t next_turn = 0;
  std::size_t next_seg = 0;

  auto add = [&](double cs, bool agree, const std::set<std::string>& a_codes, const std::set<std::string>& b_codes) {
    auto p = make_pair("fx-" + std::to_string(next_seg++), cs, agree);
    const auto ta = ++next_turn;
    const auto tb = ++next_turn;
    p.turn_ids = {ta, tb};
    f.turns.emplace(ta, make_turn(ta, rtrace::PersonaId::coder_a, a_codes));
    f.turns.emplace(tb, make_turn(tb, rtrace::PersonaId::coder_b, b_codes));
    f.pairs.push_back(std::move(p));
  };

  for (const auto& code : codebook8().names()) {
    for (std::size_t i = 0; i < per_code; ++i) add(mid(rng), true, {code}, {code});
    // Distractors: same quadrant outside the band, and in-band pairs that disagree.
    add(0.40, true, {code}, {code});
    add(0.90, true, {code}, {code});
    add(mid(rng), false, {code}, {});
  }
  for (std::size_t i = 0; i < between; ++i) add(high(rng), false, {"Greeting"}, {"Instruction"});
  add(0.995, false, {"Greeting"}, {});
  add(0.97, true, {"Greeting"}, {"Greeting"});
  return f;
}

}  // namespace testing

namespace testing {

std::vector<rtrace::PairComparison> quadrant_fixture(std::uint64_t seed) {
  struct Cell {
    std::size_t n;
    double mean;
    double spread;  // half-width around the mean, kept on the right side of tau
    bool agree;
  };
  const Cell cells[] = {{4598, 0.965, 0.020, true},
                        {2680, 0.863, 0.060, false},
                        {2193, 0.916, 0.020, true},
                        {275, 0.954, 0.010, false}};
  std::mt19937_64 rng(seed);
  std::vector<rtrace::PairComparison> out;
  std::size_t next = 0;
  for (const auto& c : cells) {
    // Symmetric pairs around the mean make the sample mean exact.
    std::uniform_real_distribution<double> off(0.0, c.spread);
    for (std::size_t i = 0; i + 1 < c.n; i += 2) {
      const double d = off(rng);
      out.push_back(make_pair("t1-" + std::to_string(next++), c.mean + d, c.agree));
      out.push_back(make_pair("t1-" + std::to_string(next++), c.mean - d, c.agree));
    }
    if (c.n % 2) out.push_back(make_pair("t1-" + std::to_string(next++), c.mean, c.agree));
  }
  return out;
}

}  // namespace testing

namespace testing {

rtrace::PersonaSet bundled_personas() {
  return rtrace::load_personas(source_dir() / "data" / "prompts", "bold", "empathetic", "neutral, balanced");
}

std::vector<rtrace::ScriptEntry> script_segment(const std::string& segment_id, double temperature, const CodeSet& a1,
                                                const CodeSet& b1, std::optional<std::pair<CodeSet, CodeSet>> round2,
                                                std::optional<CodeSet> consensus) {
  using rtrace::PersonaId;
  using rtrace::Round;
  auto key = [&](Round r, PersonaId p) { return rtrace::make_request_key(segment_id, r, p, temperature); };
  std::vector<rtrace::ScriptEntry> s = {{key(Round::round1, PersonaId::coder_a), raw_turn(a1)},
                                        {key(Round::round1, PersonaId::coder_b), raw_turn(b1)}};
  if (round2) {
    s.push_back({key(Round::round2, PersonaId::coder_a), raw_turn(round2->first)});
    s.push_back({key(Round::round2, PersonaId::coder_b), raw_turn(round2->second)});
  }
  if (consensus) s.push_back({key(Round::consensus, PersonaId::consensus), raw_turn(*consensus)});
  return s;
}

}  // namespace testing

namespace testing {

rtrace::RunSummary demo_run(const std::filesystem::path& dir) {
  const auto config = rtrace::load_run_config(source_dir() / "data" / "demo" / "run_config.json");
  const auto segments = rtrace::load_segments(config.input_path);
  auto backend = rtrace::make_backend(config.backend, config.base_dir);
  return rtrace::execute_run(config, segments, *backend, dir);
}

}  // namespace testing
