#include "rtrace/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <tuple>

#include "rtrace/error.hpp"
#include "rtrace/io.hpp"
#include "rtrace/store_triage.hpp"

namespace rtrace {

json to_json(const EmbeddingConfig& c) {
  return json{{"kind", c.kind},         {"dim", c.dim},     {"max_tokens", c.max_tokens},
              {"base_url", c.base_url}, {"model", c.model}, {"api_key_env", c.api_key_env}};
}

EmbeddingConfig embedding_config_from_json(const json& j) {
  EmbeddingConfig c;
  c.kind = j.value("kind", std::string{"hashed"});
  if (c.kind != "hashed" && c.kind != "http")
    throw Error(Errc::MalformedDocument, "embedding.kind must be hashed|http, got " + c.kind);
  c.dim = j.value("dim", std::size_t{256});
  c.max_tokens = j.value("max_tokens", std::size_t{512});
  c.base_url = j.value("base_url", std::string{});
  c.model = j.value("model", std::string{});
  c.api_key_env = j.value("api_key_env", std::string{});
  return c;
}

std::shared_ptr<EmbeddingProvider> make_provider(const EmbeddingConfig& c) {
  if (c.kind == "http") {
    HttpEmbeddingConfig h;
    h.base_url = c.base_url;
    h.model = c.model;
    h.dim = c.dim;
    h.max_tokens = c.max_tokens;
    if (!c.api_key_env.empty()) {
      if (const char* key = std::getenv(c.api_key_env.c_str())) h.api_key = key;
    }
    return std::make_shared<HttpEmbeddingProvider>(std::move(h));
  }
  return std::make_shared<HashedBagProvider>(c.dim, c.max_tokens);
}

namespace {

json persona_json(const AgentPersona& p) {
  return json{{"style", p.style_descriptor},
              {"system_template", p.system_prompt_template},
              {"turn_template", p.turn_template},
              {"revision_template", p.revision_template}};
}

AgentPersona persona_from(const json& j, PersonaId id) {
  AgentPersona p;
  p.id = id;
  p.style_descriptor = j.at("style").get<std::string>();
  p.system_prompt_template = j.at("system_template").get<std::string>();
  p.turn_template = j.at("turn_template").get<std::string>();
  p.revision_template = j.value("revision_template", std::string{});
  return p;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

}  // namespace

json RunConfig::snapshot() const {
  json temps = json::array();
  for (double t : temperatures) temps.push_back(t);
  return json{{"schema", "run_config/v1"},
              {"run_id", run_id},
              {"codebook", codebook_document},
              {"personas",
               {{"coder_a", persona_json(personas.coder_a)},
                {"coder_b", persona_json(personas.coder_b)},
                {"consensus", persona_json(personas.consensus)}}},
              {"backend", to_json(backend)},
              {"temperatures", std::move(temps)},
              {"max_output_tokens", max_output_tokens},
              {"run_seed", run_seed ? json(*run_seed) : json(nullptr)},
              {"tau", tau},
              {"embedding", to_json(embedding)},
              {"bootstrap", {{"resamples", bootstrap.resamples}, {"seed", bootstrap.seed}}}};
}

RunConfig RunConfig::from_snapshot(const json& s) {
  try {
    RunConfig c;
    c.run_id = s.at("run_id").get<std::string>();
    c.codebook_document = s.at("codebook");
    const auto& p = s.at("personas");
    c.personas.coder_a = persona_from(p.at("coder_a"), PersonaId::coder_a);
    c.personas.coder_b = persona_from(p.at("coder_b"), PersonaId::coder_b);
    c.personas.consensus = persona_from(p.at("consensus"), PersonaId::consensus);
    validate_personas(c.personas);
    c.backend = backend_config_from_json(s.at("backend"));
    c.temperatures = s.at("temperatures").get<std::vector<double>>();
    c.max_output_tokens = s.value("max_output_tokens", 4096);
    if (s.contains("run_seed") && !s["run_seed"].is_null()) c.run_seed = s["run_seed"].get<std::int64_t>();
    c.tau = s.value("tau", kDefaultTau);
    c.embedding = embedding_config_from_json(s.value("embedding", json::object()));
    const auto b = s.value("bootstrap", json::object());
    c.bootstrap.resamples = b.value("resamples", 1000);
    c.bootstrap.seed = b.value("seed", c.bootstrap.seed);
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDocument, std::string("run config snapshot: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j = json::parse(io::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::MalformedDocument, "invalid run config " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  try {
    RunConfig c;
    c.base_dir = base;
    c.run_id = j.at("run_id").get<std::string>();
    const auto cb_path = resolve(base, j.at("codebook").get<std::string>());
    c.codebook_document = json::parse(io::read_file(cb_path), nullptr, false);
    if (c.codebook_document.is_discarded()) throw Error(Errc::MalformedDocument, "invalid JSON in " + cb_path.string());
    load_codebook(c.codebook_document);

    const auto personas = j.value("personas", json::object());
    auto style = [&](const char* id, const char* fallback) {
      return personas.value(id, json::object()).value("style", std::string{fallback});
    };
    c.personas = load_personas(resolve(base, j.value("prompts", std::string{"prompts"})), style("coder_a", "bold"),
                               style("coder_b", "empathetic"), style("consensus", "neutral, balanced"));
    c.backend = backend_config_from_json(j.at("backend"));
    if (j.contains("temperatures")) c.temperatures = j["temperatures"].get<std::vector<double>>();
    for (double t : c.temperatures) {
      if (t < 0.0 || t > 2.0) throw Error(Errc::MalformedDocument, "temperature outside [0, 2]");
    }
    c.max_output_tokens = j.value("max_output_tokens", 4096);
    if (j.contains("seed") && !j["seed"].is_null()) c.run_seed = j["seed"].get<std::int64_t>();
    c.tau = j.value("tau", kDefaultTau);
    c.embedding = embedding_config_from_json(j.value("embedding", json::object()));
    const auto b = j.value("bootstrap", json::object());
    c.bootstrap.resamples = b.value("resamples", 1000);
    c.bootstrap.seed = b.value("seed", c.bootstrap.seed);
    c.input_path = resolve(base, j.at("input").get<std::string>());
    c.output_root = resolve(base, j.value("output_dir", std::string{"runs"}));
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDocument, path.string() + ": " + e.what());
  }
}

std::vector<Segment> load_segments(const std::filesystem::path& path) {
  std::vector<Segment> out;
  for (const auto& j : io::read_jsonl(path)) out.push_back(segment_from_json(j));
  return out;
}

json to_json(const RunManifest& m) {
  return json{{"schema", "manifest/v1"},
              {"run_id", m.run_id},
              {"created_at", m.created_at},
              {"software_version", m.software_version},
              {"counts", {{"segments", m.segments}, {"turns", m.turns}, {"pairs", m.pairs}, {"failures", m.failures}}},
              {"config", m.config}};
}

RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.created_at = j.value("created_at", std::string{});
    m.software_version = j.value("software_version", std::string{});
    const auto& c = j.at("counts");
    m.segments = c.at("segments").get<std::size_t>();
    m.turns = c.at("turns").get<std::size_t>();
    m.pairs = c.at("pairs").get<std::size_t>();
    m.failures = c.at("failures").get<std::size_t>();
    m.config = j.value("config", json::object());
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::StoreFailure, std::string("manifest: ") + e.what());
  }
}

RunSummary execute_run(const RunConfig& config, std::span<const Segment> segments, LlmBackend& backend,
                       const std::filesystem::path& run_dir, const ProgressFn& progress) {
  const Codebook cb = load_codebook(config.codebook_document);
  RunStore store(run_dir);

  CorpusConfig corpus;
  corpus.protocol.run_id = config.run_id;
  corpus.protocol.personas = config.personas;
  corpus.protocol.max_output_tokens = config.max_output_tokens;
  corpus.protocol.run_seed = config.run_seed;
  corpus.temperatures = config.temperatures;
  corpus.parallelism = config.backend.parallelism;
  const RunRecords records = run_corpus(segments, cb, backend, corpus, progress);

  // Turns: every raw output, parsed where parsing succeeded.
  std::vector<json> turn_records;
  for (const auto& d : records.discussions) {
    for (std::size_t i = 0; i < d.raw_turns.size(); ++i) {
      json r{{"schema", "turn/v1"}};
      r.update(to_json(d.raw_turns[i], d.segment_id, d.temperature));
      r["parsed"] = to_json(d.turns[i]);
      turn_records.push_back(std::move(r));
    }
  }
  for (const auto& f : records.failures) {
    for (const auto& raw : f.raw_turns) {
      json r{{"schema", "turn/v1"}};
      r.update(to_json(raw, f.segment_id, f.temperature));
      r["parsed"] = nullptr;
      turn_records.push_back(std::move(r));
    }
  }
  std::sort(turn_records.begin(), turn_records.end(), [](const json& a, const json& b) {
    return a["turn_id"].get<std::uint64_t>() < b["turn_id"].get<std::uint64_t>();
  });

  // Discussions and failures in (segment_id, temperature) order.
  std::vector<std::tuple<std::string, double, json>> discussion_rows;
  for (const auto& d : records.discussions) discussion_rows.emplace_back(d.segment_id, d.temperature, to_json(d));
  for (const auto& f : records.failures) discussion_rows.emplace_back(f.segment_id, f.temperature, to_json(f));
  std::stable_sort(discussion_rows.begin(), discussion_rows.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });

  // Pairwise comparisons per round.
  CachingProvider provider(make_provider(config.embedding));
  std::vector<PairComparison> comparisons;
  std::map<std::uint64_t, std::vector<float>> vectors;
  std::size_t comparison_failures = 0;
  for (const auto& d : records.discussions) {
    const PairContext ctx{d.segment_id, d.run_id, d.temperature};
    for (std::size_t first : {std::size_t{0}, std::size_t{2}}) {
      if (first + 1 >= d.turns.size() || d.turns[first].round == Round::consensus) continue;
      const auto& a = d.turns[first];
      const auto& b = d.turns[first + 1];
      try {
        comparisons.push_back(compare_pair(a, b, cb, provider, config.tau, ctx));
        for (const auto* t : {&a, &b}) {
          vectors[t->turn_id] = provider.embed(t->degraded() ? t->explanation : t->reasoning).vector.values;
        }
      } catch (const Error&) {
        ++comparison_failures;
      }
    }
  }
  comparisons = canonical_order(comparisons);

  std::vector<Segment> sorted_segments(segments.begin(), segments.end());
  std::sort(sorted_segments.begin(), sorted_segments.end(),
            [](const Segment& a, const Segment& b) { return a.id < b.id; });
  std::vector<json> segment_records;
  for (const auto& s : sorted_segments) segment_records.push_back(to_json(s));

  std::vector<json> discussion_records;
  for (auto& row : discussion_rows) discussion_records.push_back(std::move(std::get<2>(row)));
  std::vector<json> comparison_records;
  for (const auto& c : comparisons) comparison_records.push_back(to_json(c));
  std::vector<StoredEmbedding> stored;
  for (auto& [id, values] : vectors) stored.push_back({id, std::move(values)});

  store.write_json("config.json", config.snapshot());
  store.write_records("segments.jsonl", segment_records);
  store.write_records("turns.jsonl", turn_records);
  store.write_records("discussions.jsonl", discussion_records);
  store.write_records("comparisons.jsonl", comparison_records);
  write_embedding_store(store.path("embeddings.bin"), static_cast<std::uint32_t>(provider.dim()), stored);
  for (auto file : {"cases.jsonl", "adjudications.jsonl"}) {
    if (!std::filesystem::exists(store.path(file))) io::atomic_write(store.path(file), "");
  }

  RunManifest manifest;
  manifest.run_id = config.run_id;
  manifest.created_at = utc_timestamp();
  if (std::filesystem::exists(store.path("manifest.json"))) {
    auto previous = store.read_json("manifest.json");
    manifest.created_at = previous.value("created_at", manifest.created_at);
  }
  manifest.config = config.snapshot();
  manifest.segments = sorted_segments.size();
  manifest.turns = turn_records.size();
  manifest.pairs = comparisons.size();
  manifest.failures = records.failures.size() + comparison_failures;
  store.write_json("manifest.json", to_json(manifest));
  return {run_dir, manifest};
}

namespace {

// Replays recorded text while reporting the backend that originally produced it,
// so a replayed turns.jsonl matches the recorded one byte for byte.
class SourcePreservingBackend final : public LlmBackend {
 public:
  SourcePreservingBackend(ReplayBackend& inner, std::map<std::string, std::string> sources)
      : inner_(inner), sources_(std::move(sources)) {}
  const std::string& backend_id() const override { return inner_.backend_id(); }
  CompletionResponse complete(const CompletionRequest& request) override {
    auto r = inner_.complete(request);
    if (auto it = sources_.find(request.request_key); it != sources_.end() && !it->second.empty())
      r.backend_id = it->second;
    return r;
  }

 private:
  ReplayBackend& inner_;
  std::map<std::string, std::string> sources_;
};

}  // namespace

RunSummary replay_run(const std::filesystem::path& run_dir, const ProgressFn& progress) {
  RunStore store(run_dir);
  if (!std::filesystem::exists(store.path("config.json")))
    throw Error(Errc::StoreFailure, "no config.json in " + run_dir.string());
  RunConfig config = RunConfig::from_snapshot(store.read_json("config.json"));
  const auto segments = store.segments();
  std::map<std::string, std::string> recorded;
  std::map<std::string, std::string> sources;
  for (const auto& t : store.read_records("turns.jsonl")) {
    const auto key = t.at("request_key").get<std::string>();
    recorded[key] = t.at("raw_text").get<std::string>();
    sources[key] = t.value("backend_id", std::string{});
  }
  ReplayBackend replay(std::move(recorded));
  SourcePreservingBackend backend(replay, std::move(sources));
  return execute_run(config, segments, backend, run_dir, progress);
}

}  // namespace rtrace
