#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rtrace/analytics.hpp"
#include "rtrace/domain.hpp"
#include "rtrace/embedding.hpp"
#include "rtrace/llm_gateway.hpp"
#include "rtrace/orchestrator.hpp"

namespace rtrace {

inline constexpr std::string_view kSoftwareVersion = "0.3.0";

struct EmbeddingConfig {
  std::string kind = "hashed";  // "hashed" | "http"
  std::size_t dim = 256;
  std::size_t max_tokens = 512;
  std::string base_url;
  std::string model;
  std::string api_key_env;
};

json to_json(const EmbeddingConfig& c);
EmbeddingConfig embedding_config_from_json(const json& j);
std::shared_ptr<EmbeddingProvider> make_provider(const EmbeddingConfig& c);

/// A run configuration after all referenced files were read. `snapshot()` is
/// written to <run>/config.json and is enough to replay the run.
struct RunConfig {
  std::string run_id;
  json codebook_document;
  PersonaSet personas;
  BackendConfig backend;
  std::vector<double> temperatures{0.0};
  int max_output_tokens = 4096;
  std::optional<std::int64_t> run_seed;
  double tau = kDefaultTau;
  EmbeddingConfig embedding;
  stats::BootstrapOptions bootstrap;
  std::filesystem::path input_path;   // segments JSONL (run only)
  std::filesystem::path output_root;  // runs/ (run only)
  std::filesystem::path base_dir;     // resolves relative paths in the backend config

  json snapshot() const;
  static RunConfig from_snapshot(const json& snapshot);
};

/// Reads a run config file (JSON). Relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

std::vector<Segment> load_segments(const std::filesystem::path& jsonl_path);

struct RunManifest {
  std::string run_id;
  std::string created_at;
  std::string software_version{kSoftwareVersion};
  json config;
  std::size_t segments = 0;
  std::size_t turns = 0;
  std::size_t pairs = 0;
  std::size_t failures = 0;
};

json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);

struct RunSummary {
  std::filesystem::path run_dir;
  RunManifest manifest;
};

using ProgressFn = std::function<void(const CorpusProgress&)>;

/// Codes every segment through the backend and writes the complete run
/// directory (turns, discussions, comparisons, embeddings, manifest).
RunSummary execute_run(const RunConfig& config, std::span<const Segment> segments, LlmBackend& backend,
                       const std::filesystem::path& run_dir, const ProgressFn& progress = {});

/// Re-derives a run from its recorded raw turns with a replay backend and
/// rewrites every derived file. Byte-identical across repeated replays.
RunSummary replay_run(const std::filesystem::path& run_dir, const ProgressFn& progress = {});

}  // namespace rtrace
