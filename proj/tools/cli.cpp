#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>

#include "rtrace/api.hpp"
#include "rtrace/error.hpp"
#include "rtrace/io.hpp"
#include "rtrace/pipeline.hpp"
#include "rtrace/store_triage.hpp"
#include "server.hpp"

namespace rtrace::cli {

namespace {

struct RunContext {
  RunStore store;
  json snapshot;
  Codebook codebook;

  explicit RunContext(const std::filesystem::path& dir)
      : store(dir), snapshot(read_snapshot(store)), codebook(load_codebook(snapshot.at("codebook"))) {}

  double tau() const { return snapshot.value("tau", kDefaultTau); }

  stats::BootstrapOptions bootstrap() const {
    stats::BootstrapOptions b;
    const auto j = snapshot.value("bootstrap", json::object());
    b.resamples = j.value("resamples", b.resamples);
    b.seed = j.value("seed", b.seed);
    return b;
  }

  static json read_snapshot(const RunStore& s) {
    if (!std::filesystem::exists(s.path("config.json")))
      throw Error(Errc::PreconditionFailed, "not a run directory: " + s.dir().string());
    return s.read_json("config.json");
  }
};

Band parse_band(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(Errc::PreconditionFailed, "band must be LOW:HIGH, got " + s);
  Band b;
  try {
    b.low = std::stod(s.substr(0, colon));
    b.high = std::stod(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(Errc::PreconditionFailed, "band must be LOW:HIGH, got " + s);
  }
  validate_band(b);
  return b;
}

void print_progress(std::ostream& err, const CorpusProgress& p) {
  if (p.done == p.total || p.done % 25 == 0)
    err << "coded " << p.done << "/" << p.total << " (" << p.failures << " failed)\n";
}

int finish_run(const RunSummary& summary, std::ostream& out) {
  const auto& m = summary.manifest;
  out << "run " << m.run_id << ": " << m.segments << " segments, " << m.turns << " turns, " << m.pairs << " pairs, "
      << m.failures << " failures -> " << summary.run_dir.string() << "\n";
  return m.failures == 0 ? kOk : kPartialFailure;
}

bool is_usage_error(Errc e) {
  switch (e) {
    case Errc::MalformedDocument:
    case Errc::PreconditionFailed:
    case Errc::UnknownCode:
    case Errc::DuplicateCodeName:
    case Errc::EmptyCodebook: return true;
    default: return false;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  io::atomic_write(path, text);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reasoning-trace alignment for multi-agent qualitative coding", "rtrace"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kSoftwareVersion));

  std::filesystem::path run_dir;
  std::filesystem::path config_path;
  std::optional<std::filesystem::path> out_path;
  std::optional<double> tau;

  auto* run_cmd = app.add_subcommand("run", "Code a corpus with the configured backend");
  run_cmd->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_path, "Run directory (default: <output_dir>/<run_id>)");

  auto* replay_cmd = app.add_subcommand("replay", "Re-derive a run from its recorded raw turns");
  replay_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  std::string threshold = "fixed";
  bool exclude_degraded = false;
  auto* analyze_cmd = app.add_subcommand("analyze", "Write report.json and comparisons.csv");
  analyze_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  analyze_cmd->add_option("--tau", tau, "Alignment threshold (default: the run's)");
  analyze_cmd->add_option("--threshold", threshold, "fixed | otsu")->check(CLI::IsMember({"fixed", "otsu"}));
  analyze_cmd->add_flag("--exclude-degraded", exclude_degraded, "Drop pairs compared on explanations");
  analyze_cmd->add_option("--out", out_path, "Output directory")->required();

  std::string mode;
  std::size_t k = 15;
  std::size_t n = 45;
  std::optional<std::string> band;
  std::uint64_t seed = 7;
  std::vector<std::string> exclude;
  auto* sample_cmd = app.add_subcommand("sample", "Draw review cases into cases.jsonl");
  sample_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  sample_cmd->add_option("--mode", mode, "within-misalign | between-align")
      ->required()
      ->check(CLI::IsMember({"within-misalign", "between-align"}));
  sample_cmd->add_option("--k", k, "Cases per code (within-misalign)");
  sample_cmd->add_option("--n", n, "Cases (between-align)");
  sample_cmd->add_option("--band", band, "cs band LOW:HIGH");
  sample_cmd->add_option("--seed", seed, "Sampling seed");
  sample_cmd->add_option("--exclude", exclude, "Codes to skip (within-misalign)");
  sample_cmd->add_option("--tau", tau, "Alignment threshold (default: the run's)");

  ServeOptions serve_options;
  std::optional<std::filesystem::path> ui_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the JSON API (and optionally a built UI)");
  serve_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--host", serve_options.host, "Bind address");
  serve_cmd->add_option("--port", serve_options.port, "Port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--ui-dir", ui_dir, "Static UI assets")->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--tau", tau, "Alignment threshold (default: the run's)");

  std::string format;
  auto* export_cmd = app.add_subcommand("export", "Print comparisons as CSV or the report as JSON");
  export_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--format", format, "csv | json")->required()->check(CLI::IsMember({"csv", "json"}));
  export_cmd->add_option("--out", out_path, "Output file (default: stdout)");
  export_cmd->add_option("--tau", tau, "Alignment threshold (default: the run's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (run_cmd->parsed()) {
      const RunConfig config = load_run_config(config_path);
      const auto segments = load_segments(config.input_path);
      auto backend = make_backend(config.backend, config.base_dir);
      const auto dir = out_path ? *out_path : config.output_root / config.run_id;
      return finish_run(execute_run(config, segments, *backend, dir,
                                    [&err](const CorpusProgress& p) { print_progress(err, p); }),
                        out);
    }

    if (replay_cmd->parsed()) return finish_run(replay_run(run_dir), out);

    if (analyze_cmd->parsed()) {
      RunContext ctx(run_dir);
      ReportOptions options;
      options.tau = tau.value_or(ctx.tau());
      options.threshold_mode = threshold == "otsu" ? ThresholdMode::otsu : ThresholdMode::fixed;
      options.exclude_degraded = exclude_degraded;
      options.bootstrap = ctx.bootstrap();
      const auto pairs = ctx.store.comparisons();
      const json report = analysis_report(pairs, ctx.codebook, options);
      const double used_tau = report["threshold"]["tau"].get<double>();
      std::vector<PairComparison> kept;
      for (const auto& p : pairs) {
        if (!(exclude_degraded && p.degraded)) kept.push_back(p);
      }
      write_text(*out_path / "report.json", report.dump(2) + "\n");
      write_text(*out_path / "comparisons.csv", comparisons_csv(reclassify(kept, used_tau), ctx.codebook));
      out << "wrote " << (*out_path / "report.json").string() << " and " << (*out_path / "comparisons.csv").string()
          << " (" << kept.size() << " pairs, tau " << used_tau << ")\n";
      return kOk;
    }

    if (sample_cmd->parsed()) {
      RunContext ctx(run_dir);
      const auto turns = ctx.store.parsed_turns(ctx.codebook);
      const TurnLookup lookup = [&turns](std::uint64_t id) -> const ParsedTurn* {
        auto it = turns.find(id);
        return it == turns.end() ? nullptr : &it->second;
      };
      const auto pairs = reclassify(ctx.store.comparisons(), tau.value_or(ctx.tau()));
      SampleResult result;
      if (mode == "within-misalign") {
        WithinMisalignOptions o;
        o.k_per_code = k;
        if (band) o.band = parse_band(*band);
        o.seed = seed;
        o.tau = tau.value_or(ctx.tau());
        o.exclude_codes = exclude;
        result = sample_within_misalign(pairs, lookup, ctx.codebook, o);
      } else {
        BetweenAlignOptions o;
        o.n = n;
        if (band) o.band = parse_band(*band);
        o.seed = seed;
        o.tau = tau.value_or(ctx.tau());
        result = sample_between_align(pairs, lookup, o);
      }
      const auto added = ctx.store.add_cases(result.cases);
      out << "sampled " << result.cases.size() << " cases (" << added << " new) into "
          << ctx.store.path("cases.jsonl").string() << "\n";
      for (const auto& s : result.shortfalls) {
        err << "shortfall" << (s.code.empty() ? "" : " for " + s.code) << ": requested " << s.requested
            << ", available " << s.available << "\n";
      }
      return kOk;
    }

    if (serve_cmd->parsed()) {
      ApiService service(run_dir, tau);
      serve_options.ui_dir = ui_dir;
      if (!serve(service, serve_options)) {
        err << "cannot listen on " << serve_options.host << ":" << serve_options.port << "\n";
        return kPartialFailure;
      }
      return kOk;
    }

    if (export_cmd->parsed()) {
      RunContext ctx(run_dir);
      const auto pairs = reclassify(ctx.store.comparisons(), tau.value_or(ctx.tau()));
      std::string text;
      if (format == "csv") {
        text = comparisons_csv(pairs, ctx.codebook);
      } else {
        ReportOptions options;
        options.tau = tau.value_or(ctx.tau());
        options.bootstrap = ctx.bootstrap();
        text = analysis_report(pairs, ctx.codebook, options).dump(2) + "\n";
      }
      if (out_path)
        write_text(*out_path, text);
      else
        out << text;
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_usage_error(e.code()) ? kUsage : kPartialFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kPartialFailure;
  }
  return kUsage;
}

}  // namespace rtrace::cli
