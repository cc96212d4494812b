#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rtrace/domain.hpp"
#include "rtrace/retry.hpp"
#include "rtrace/trace_parser.hpp"

namespace rtrace {

/// A persona's prompt templates. Placeholders: {style}, {codebook}, {segment},
/// {peer_output}. Substitution is single-pass, so inserted text is never
/// re-expanded.
struct AgentPersona {
  PersonaId id = PersonaId::coder_a;
  std::string style_descriptor;
  std::string system_prompt_template;
  // User message for Round 1 (coders) or the arbitration request (consensus).
  std::string turn_template;
  // User message for Round 2; coders only.
  std::string revision_template;
};

struct PersonaSet {
  AgentPersona coder_a;
  AgentPersona coder_b;
  AgentPersona consensus;

  const AgentPersona& get(PersonaId id) const;
};

/// Throws PreconditionFailed when the coder styles coincide or a template
/// needed for peer output lacks {peer_output}.
void validate_personas(const PersonaSet& personas);

/// Loads system.txt, coder_round1.txt, coder_round2.txt and consensus.txt
/// from a directory and attaches the given style descriptors.
PersonaSet load_personas(const std::filesystem::path& prompt_dir, const std::string& style_a,
                         const std::string& style_b, const std::string& style_consensus);

struct ChatMessage {
  std::string role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

std::string render_codebook(const Codebook& cb);
std::string render_segment(const Segment& seg);

/// Pure. peer_output is required for the consensus persona and for Round-2
/// turns (MissingPeerOutput otherwise).
std::vector<ChatMessage> render_prompt(const AgentPersona& persona, const Codebook& cb, const Segment& seg,
                                       const std::optional<std::string>& peer_output, Round round);

struct CompletionRequest {
  PersonaId persona = PersonaId::coder_a;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 4096;
  std::optional<std::int64_t> run_seed;
  // Stable identity of the call, used by scripted and replay backends.
  std::string request_key;
};

std::string make_request_key(const std::string& segment_id, Round round, PersonaId persona, double temperature);

struct CompletionResponse {
  std::string raw_text;
  std::int64_t latency_ms = 0;
  std::string backend_id;
  bool truncated = false;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual const std::string& backend_id() const = 0;
  /// Errors: BackendUnreachable, BackendRejected, ScriptExhausted.
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

struct ScriptEntry {
  std::string request_key;  // "*" matches any request
  std::string raw_text;
};

std::vector<ScriptEntry> load_script(const std::filesystem::path& jsonl_path);

/// Serves canned turns: each entry is consumed once, exact key first, then "*".
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(std::vector<ScriptEntry> entries);

  const std::string& backend_id() const override { return id_; }
  CompletionResponse complete(const CompletionRequest& request) override;
  std::size_t calls() const;

 private:
  std::string id_ = "scripted";
  mutable std::mutex mu_;
  std::map<std::string, std::deque<std::string>> queues_;
  std::size_t calls_ = 0;
};

/// Returns the recorded text for a request key, any number of times.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(std::map<std::string, std::string> recorded);

  const std::string& backend_id() const override { return id_; }
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  std::string id_ = "replay";
  std::map<std::string, std::string> recorded_;
};

struct HttpBackendConfig {
  std::string base_url;  // requests go to {base_url}/chat/completions
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{300};
  RetryPolicy retry;
};

/// Chat-completion JSON over HTTP. Retries timeouts, transport errors and 5xx.
/// A separate `reasoning_content` field, when the server returns one, is folded
/// back into a <think> block so the raw text keeps the usual layout.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config, Sleeper sleep = real_sleeper());

  const std::string& backend_id() const override { return id_; }
  CompletionResponse complete(const CompletionRequest& request) override;

  static std::string request_body(const std::string& model, const CompletionRequest& request);

 private:
  HttpBackendConfig config_;
  Sleeper sleep_;
  std::string id_;
};

enum class BackendKind { http, scripted, replay };

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::string base_url;
  std::string api_key_env;
  std::string model;
  int parallelism = 4;
  std::filesystem::path script_path;  // scripted backends
  int timeout_s = 300;
  RetryPolicy retry;
};

json to_json(const BackendConfig& c);
BackendConfig backend_config_from_json(const json& j);

/// Builds the backend a config describes. Replay backends need the recorded
/// turns and are built by the pipeline instead.
std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config, const std::filesystem::path& base_dir = {});

}  // namespace rtrace
