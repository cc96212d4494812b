#include "rtrace/llm_gateway.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "http_client.hpp"
#include "rtrace/error.hpp"
#include "rtrace/io.hpp"

namespace rtrace {

const AgentPersona& PersonaSet::get(PersonaId id) const {
  switch (id) {
    case PersonaId::coder_a: return coder_a;
    case PersonaId::coder_b: return coder_b;
    case PersonaId::consensus: return consensus;
  }
  return coder_a;
}

void validate_personas(const PersonaSet& p) {
  if (p.coder_a.id != PersonaId::coder_a || p.coder_b.id != PersonaId::coder_b || p.consensus.id != PersonaId::consensus)
    throw Error(Errc::PreconditionFailed, "persona ids out of place");
  if (p.coder_a.style_descriptor == p.coder_b.style_descriptor)
    throw Error(Errc::PreconditionFailed, "coder_a and coder_b share the style '" + p.coder_a.style_descriptor + "'");
  if (p.consensus.turn_template.find("{peer_output}") == std::string::npos)
    throw Error(Errc::PreconditionFailed, "consensus template lacks {peer_output}");
  for (const auto* coder : {&p.coder_a, &p.coder_b}) {
    if (coder->revision_template.find("{peer_output}") == std::string::npos)
      throw Error(Errc::PreconditionFailed, std::string(to_string(coder->id)) + " revision template lacks {peer_output}");
  }
}

PersonaSet load_personas(const std::filesystem::path& dir, const std::string& style_a, const std::string& style_b,
                         const std::string& style_consensus) {
  const auto system = io::read_file(dir / "system.txt");
  const auto round1 = io::read_file(dir / "coder_round1.txt");
  const auto round2 = io::read_file(dir / "coder_round2.txt");
  const auto consensus = io::read_file(dir / "consensus.txt");
  PersonaSet set{
      {PersonaId::coder_a, style_a, system, round1, round2},
      {PersonaId::coder_b, style_b, system, round1, round2},
      {PersonaId::consensus, style_consensus, system, consensus, {}},
  };
  validate_personas(set);
  return set;
}

std::string render_codebook(const Codebook& cb) {
  std::string out;
  for (const auto& c : cb.codes()) {
    out += "- " + c.name + ": " + c.definition;
    if (!c.examples.empty()) {
      out += " Examples:";
      for (const auto& e : c.examples) out += " \"" + e + "\"";
    }
    out += "\n";
  }
  return out;
}

std::string render_segment(const Segment& seg) {
  return "[" + std::string(to_string(seg.speaker)) + "] " + seg.text;
}

namespace {

std::string substitute(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string format_temperature(double t) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, t);
  return std::string(buf, end);
}

}  // namespace

std::vector<ChatMessage> render_prompt(const AgentPersona& persona, const Codebook& cb, const Segment& seg,
                                       const std::optional<std::string>& peer_output, Round round) {
  const bool needs_peer = persona.id == PersonaId::consensus || round == Round::round2;
  if (needs_peer && !peer_output)
    throw Error(Errc::MissingPeerOutput, std::string(to_string(persona.id)) + " " + std::string(to_string(round)));

  const std::map<std::string, std::string> values{
      {"style", persona.style_descriptor},
      {"codebook", render_codebook(cb)},
      {"segment", render_segment(seg)},
      {"peer_output", peer_output.value_or("")},
  };
  const std::string& user_tmpl =
      persona.id != PersonaId::consensus && round == Round::round2 ? persona.revision_template : persona.turn_template;
  return {
      {"system", substitute(persona.system_prompt_template, values)},
      {"user", substitute(user_tmpl, values)},
  };
}

std::string make_request_key(const std::string& segment_id, Round round, PersonaId persona, double temperature) {
  return segment_id + "|" + std::string(to_string(round)) + "|" + std::string(to_string(persona)) + "|t=" +
         format_temperature(temperature);
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw Error(Errc::MalformedDocument, "no script at " + path.string());
  std::vector<ScriptEntry> out;
  for (const auto& j : io::read_jsonl(path)) {
    if (!j.contains("request_key") || !j.contains("raw_text") || !j["request_key"].is_string() ||
        !j["raw_text"].is_string())
      throw Error(Errc::MalformedDocument, "script records need string request_key and raw_text");
    out.push_back({j["request_key"].get<std::string>(), j["raw_text"].get<std::string>()});
  }
  return out;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) {
  for (auto& e : entries) queues_[e.request_key].push_back(std::move(e.raw_text));
}

CompletionResponse ScriptedBackend::complete(const CompletionRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  for (const auto& key : {request.request_key, std::string("*")}) {
    auto it = queues_.find(key);
    if (it != queues_.end() && !it->second.empty()) {
      CompletionResponse r;
      r.raw_text = std::move(it->second.front());
      it->second.pop_front();
      r.backend_id = id_;
      return r;
    }
  }
  throw Error(Errc::ScriptExhausted, "no scripted turn left for " + request.request_key);
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

ReplayBackend::ReplayBackend(std::map<std::string, std::string> recorded) : recorded_(std::move(recorded)) {}

CompletionResponse ReplayBackend::complete(const CompletionRequest& request) {
  auto it = recorded_.find(request.request_key);
  if (it == recorded_.end()) throw Error(Errc::ScriptExhausted, "no recorded turn for " + request.request_key);
  CompletionResponse r;
  r.raw_text = it->second;
  r.backend_id = id_;
  return r;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config, Sleeper sleep)
    : config_(std::move(config)), sleep_(std::move(sleep)), id_("http:" + config_.model) {}

std::string HttpChatBackend::request_body(const std::string& model, const CompletionRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body{{"model", model},
                      {"messages", std::move(messages)},
                      {"temperature", request.temperature},
                      {"max_tokens", request.max_output_tokens},
                      {"stream", false}};
  if (request.run_seed) body["seed"] = *request.run_seed;
  return body.dump();
}

CompletionResponse HttpChatBackend::complete(const CompletionRequest& request) {
  if (request.messages.empty()) throw Error(Errc::PreconditionFailed, "completion request without messages");
  const auto body = request_body(config_.model, request);
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

  const auto started = std::chrono::steady_clock::now();
  auto outcome = detail::post_json_with_retries(detail::parse_base_url(config_.base_url), "/chat/completions", body,
                                                headers, config_.timeout, config_.retry, sleep_);
  if (!outcome.reply)
    throw Error(Errc::BackendUnreachable,
                "after " + std::to_string(outcome.attempts) + " attempts: " + outcome.last_error);
  if (outcome.reply->status < 200 || outcome.reply->status >= 300)
    throw Error(Errc::BackendRejected, std::to_string(outcome.reply->status) + " " + outcome.reply->body);

  auto reply = nlohmann::json::parse(outcome.reply->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
    throw Error(Errc::BackendRejected, "200 malformed completion: " + outcome.reply->body);
  const auto& choice = reply["choices"][0];
  const auto& message = choice.value("message", nlohmann::json::object());

  CompletionResponse r;
  const std::string content = message.contains("content") && message["content"].is_string()
                                  ? message["content"].get<std::string>()
                                  : std::string{};
  if (message.contains("reasoning_content") && message["reasoning_content"].is_string() &&
      content.find("<think>") == std::string::npos) {
    r.raw_text = "<think>" + message["reasoning_content"].get<std::string>() + "</think>" + content;
  } else {
    r.raw_text = content;
  }
  r.truncated = choice.value("finish_reason", std::string{}) == "length";
  r.latency_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
  r.backend_id = id_;
  return r;
}

namespace {

std::string_view kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::http: return "http";
    case BackendKind::scripted: return "scripted";
    case BackendKind::replay: return "replay";
  }
  return "scripted";
}

}  // namespace

json to_json(const BackendConfig& c) {
  return json{{"kind", kind_name(c.kind)},
              {"base_url", c.base_url},
              {"api_key_env", c.api_key_env},
              {"model", c.model},
              {"parallelism", c.parallelism},
              {"script_path", c.script_path.string()},
              {"timeout_s", c.timeout_s},
              {"max_retries", c.retry.max_retries},
              {"initial_backoff_ms", c.retry.initial_backoff.count()}};
}

BackendConfig backend_config_from_json(const json& j) {
  BackendConfig c;
  const auto kind = j.value("kind", std::string{"scripted"});
  if (kind == "http")
    c.kind = BackendKind::http;
  else if (kind == "scripted")
    c.kind = BackendKind::scripted;
  else if (kind == "replay")
    c.kind = BackendKind::replay;
  else
    throw Error(Errc::MalformedDocument, "backend.kind must be http|scripted|replay, got " + kind);
  c.base_url = j.value("base_url", std::string{});
  c.api_key_env = j.value("api_key_env", std::string{});
  c.model = j.value("model", std::string{});
  c.parallelism = j.value("parallelism", 4);
  if (c.parallelism < 1) throw Error(Errc::MalformedDocument, "backend.parallelism must be >= 1");
  c.script_path = j.value("script_path", std::string{});
  c.timeout_s = j.value("timeout_s", 300);
  c.retry.max_retries = j.value("max_retries", 3);
  c.retry.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", 1000));
  return c;
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config, const std::filesystem::path& base_dir) {
  switch (config.kind) {
    case BackendKind::http: {
      HttpBackendConfig h;
      h.base_url = config.base_url;
      h.model = config.model;
      if (!config.api_key_env.empty()) {
        if (const char* key = std::getenv(config.api_key_env.c_str())) h.api_key = key;
      }
      h.timeout = std::chrono::seconds(config.timeout_s);
      h.retry = config.retry;
      return std::make_unique<HttpChatBackend>(std::move(h));
    }
    case BackendKind::scripted: {
      auto path = config.script_path;
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      return std::make_unique<ScriptedBackend>(load_script(path));
    }
    case BackendKind::replay:
      throw Error(Errc::PreconditionFailed, "replay backends are built from a recorded run directory");
  }
  return nullptr;
}

}  // namespace rtrace
