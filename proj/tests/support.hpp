#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rtrace/analytics.hpp"
#include "rtrace/domain.hpp"
#include "rtrace/trace_parser.hpp"

namespace testing {

std::filesystem::path source_dir();
std::filesystem::path test_data_dir();

/// The bundled 8-code codebook.
const rtrace::Codebook& codebook8();

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "rtrace");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_bytes(const std::filesystem::path& p);

/// "<think>reasoning</think>\nexplanation\n{map}" with every listed code set to 1.
std::string raw_turn(const std::set<std::string>& positive, const std::string& reasoning = "",
                     const std::string& explanation = "Coded.");

rtrace::PairComparison make_pair(const std::string& segment_id, double cs, bool agree, double tau = 0.94,
                                 double temperature = 0.0, rtrace::Round round = rtrace::Round::round1);

rtrace::ParsedTurn make_turn(std::uint64_t id, rtrace::PersonaId agent, const std::set<std::string>& positive,
                             rtrace::Round round = rtrace::Round::round1);

/// Comparisons plus the parsed turns they point at, for sampling tests.
struct SamplingFixture {
  std::vector<rtrace::PairComparison> pairs;
  std::map<std::uint64_t, rtrace::ParsedTurn> turns;

  const rtrace::ParsedTurn* lookup(std::uint64_t id) const {
    auto it = turns.find(id);
    return it == turns.end() ? nullptr : &it->second;
  }
};

/// `per_code` WithinMisalign pairs in [0.55, 0.78] for each code (agreed
/// decision = that code only), `between` BetweenAlign pairs in [0.95, 0.99],
/// plus distractors outside every band.
SamplingFixture sampling_fixture(std::size_t per_code, std::size_t between, std::uint64_t seed = 11);

}  // namespace testing

namespace testing {

/// quadrant-shaped comparison set: 4598/2680/2193/275 pairs in
/// WithinAlign/BetweenMisalign/WithinMisalign/BetweenAlign with means
/// 0.965/0.863/0.916/0.954 (exact up to rounding) at tau 0.94.
std::vector<rtrace::PairComparison> quadrant_fixture(std::uint64_t seed = 5);

}  // namespace testing

#include "rtrace/llm_gateway.hpp"

namespace testing {

/// Personas from data/prompts with the default style descriptors.
rtrace::PersonaSet bundled_personas();

using CodeSet = std::set<std::string>;

/// Scripted turns for one segment discussion. Round 2 is scripted when
/// `round2` is set, the consensus turn when `consensus` is set.
std::vector<rtrace::ScriptEntry> script_segment(const std::string& segment_id, double temperature, const CodeSet& a1,
                                                const CodeSet& b1, std::optional<std::pair<CodeSet, CodeSet>> round2 = {},
                                                std::optional<CodeSet> consensus = {});

}  // namespace testing

#include "rtrace/pipeline.hpp"

namespace testing {

/// Codes the bundled demo corpus (data/demo) into `dir` with its scripted backend.
rtrace::RunSummary demo_run(const std::filesystem::path& dir);

}  // namespace testing
