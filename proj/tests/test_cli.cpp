#include <doctest.h>

#include <sys/wait.h>

#include <sstream>

#include "cli.hpp"
#include "rtrace/io.hpp"
#include "rtrace/store_triage.hpp"
#include "support.hpp"

using namespace rtrace;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "rtrace");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int spawn(const std::string& args) {
  const std::string cmd = std::string(RTRACE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string demo_config() { return (testing::source_dir() / "data" / "demo" / "run_config.json").string(); }

}  // namespace

TEST_CASE("run, replay twice, analyze") {
  testing::TempDir tmp;
  const auto run_dir = (tmp.path() / "demo").string();
  const auto r = cli_run({"run", "--config", demo_config(), "--out", run_dir});
  CHECK(r.code == 0);
  CHECK(r.out.find("30 segments") != std::string::npos);
  CHECK(r.out.find("0 failures") != std::string::npos);

  const auto before = testing::read_bytes(tmp.path() / "demo" / "comparisons.jsonl");
  CHECK(cli_run({"replay", "--run", run_dir}).code == 0);
  const auto first = testing::read_bytes(tmp.path() / "demo" / "comparisons.jsonl");
  CHECK(cli_run({"replay", "--run", run_dir}).code == 0);
  const auto second = testing::read_bytes(tmp.path() / "demo" / "comparisons.jsonl");
  CHECK(first == second);
  CHECK(first == before);

  const auto report_dir = tmp.path() / "report";
  const auto a = cli_run({"analyze", "--run", run_dir, "--tau", "0.94", "--out", report_dir.string()});
  CHECK(a.code == 0);
  REQUIRE(std::filesystem::exists(report_dir / "report.json"));
  REQUIRE(std::filesystem::exists(report_dir / "comparisons.csv"));
  const auto report = json::parse(testing::read_bytes(report_dir / "report.json"));
  CHECK(report["threshold"]["tau"] == 0.94);
  const auto report_bytes = testing::read_bytes(report_dir / "report.json");
  CHECK(cli_run({"analyze", "--run", run_dir, "--out", report_dir.string()}).code == 0);
  CHECK(testing::read_bytes(report_dir / "report.json") == report_bytes);

  CHECK(cli_run({"analyze", "--run", run_dir, "--threshold", "otsu", "--exclude-degraded", "--out",
                 (tmp.path() / "otsu").string()})
            .code == 0);
  const auto otsu = json::parse(testing::read_bytes(tmp.path() / "otsu" / "report.json"));
  CHECK(otsu["threshold"]["mode"] == "otsu");
  CHECK(otsu["pairs"]["excluded_degraded"].get<int>() > 0);
}

TEST_CASE("sample and export") {
  testing::TempDir tmp;
  testing::demo_run(tmp.path());
  const auto dir = tmp.path().string();
  const auto s = cli_run({"sample", "--run", dir, "--mode", "within-misalign", "--k", "15", "--band", "0.55:0.78",
                          "--seed", "7", "--tau", "0.99"});
  CHECK(s.code == 0);
  RunStore store(tmp.path());
  const auto cases = store.cases(testing::codebook8());
  std::map<std::string, int> per_code;
  for (const auto& c : cases) {
    CHECK(c.pair.quadrant == Quadrant::WithinMisalign);
    CHECK(c.pair.cs >= 0.55);
    CHECK(c.pair.cs <= 0.78);
    ++per_code[c.stratum_code];
  }
  for (const auto& [code, n] : per_code) CHECK(n <= 15);
  // The small demo cannot fill every stratum.
  CHECK(s.err.find("shortfall") != std::string::npos);

  const auto again = cli_run({"sample", "--run", dir, "--mode", "within-misalign", "--band", "0.55:0.78", "--tau",
                              "0.99"});
  CHECK(again.out.find("(0 new)") != std::string::npos);

  const auto b = cli_run({"sample", "--run", dir, "--mode", "between-align", "--n", "5", "--band", "0.5:0.99"});
  CHECK(b.code == 0);

  const auto csv = cli_run({"export", "--run", dir, "--format", "csv"});
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("segment_id,run_id,round", 0) == 0);
  const auto js = cli_run({"export", "--run", dir, "--format", "json", "--out", (tmp.path() / "r.json").string()});
  CHECK(js.code == 0);
  CHECK(json::parse(testing::read_bytes(tmp.path() / "r.json"))["schema"] == "report/v1");
}

TEST_CASE("usage errors exit 2") {
  testing::TempDir tmp;
  CHECK(cli_run({}).code == 2);
  CHECK(cli_run({"frobnicate"}).code == 2);
  CHECK(cli_run({"analyze", "--run", tmp.path().string()}).code == 2);  // --out missing
  CHECK(cli_run({"replay", "--run", (tmp.path() / "missing").string()}).code == 2);
  // Not a run directory.
  CHECK(cli_run({"analyze", "--run", tmp.path().string(), "--out", tmp.path().string()}).code == 2);

  testing::demo_run(tmp.path());
  CHECK(cli_run({"sample", "--run", tmp.path().string(), "--mode", "between-align", "--band", "0.99:0.95"}).code == 2);
  CHECK(cli_run({"sample", "--run", tmp.path().string(), "--mode", "sideways"}).code == 2);
  CHECK(cli_run({"--version"}).code == 0);
}

TEST_CASE("a run with a failing segment exits 1") {
  testing::TempDir tmp;
  const auto base = testing::source_dir() / "data";
  io::write_jsonl(tmp.path() / "segments.jsonl",
                  {json{{"id", "a"}, {"session_id", "s"}, {"speaker", "tutor"}, {"text", "Hi!"}, {"index_in_session", 0}}});
  io::write_jsonl(tmp.path() / "script.jsonl", {json{{"request_key", "*"}, {"raw_text", "no map"}}});
  io::atomic_write(tmp.path() / "cfg.json",
                   json{{"run_id", "broken"},
                        {"codebook", (base / "codebook.json").string()},
                        {"prompts", (base / "prompts").string()},
                        {"input", "segments.jsonl"},
                        {"backend", {{"kind", "scripted"}, {"script_path", "script.jsonl"}}}}
                       .dump());
  const auto r = cli_run({"run", "--config", (tmp.path() / "cfg.json").string(), "--out", (tmp.path() / "run").string()});
  CHECK(r.code == 1);
  CHECK(r.out.find("1 failures") != std::string::npos);
}

TEST_CASE("the installed executable reports the same exit codes") {
  testing::TempDir tmp;
  CHECK(spawn("--version") == 0);
  CHECK(spawn("") == 2);
  CHECK(spawn("run --config " + demo_config() + " --out " + (tmp.path() / "d").string()) == 0);
  CHECK(spawn("replay --run " + (tmp.path() / "d").string()) == 0);
}
