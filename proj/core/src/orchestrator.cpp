#include "rtrace/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <thread>

namespace rtrace {

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::round1_consensus: return "round1_consensus";
    case Outcome::round2_consensus: return "round2_consensus";
    case Outcome::arbitrated: return "arbitrated";
  }
  return "round1_consensus";
}

Outcome outcome_from_string(std::string_view s) {
  for (auto o : {Outcome::round1_consensus, Outcome::round2_consensus, Outcome::arbitrated})
    if (to_string(o) == s) return o;
  throw Error(Errc::MalformedDocument, "unknown outcome '" + std::string(s) + "'");
}

namespace {

class Discussion {
 public:
  Discussion(const Segment& seg, const Codebook& cb, LlmBackend& backend, const ProtocolConfig& config,
             std::uint64_t turn_id_base)
      : seg_(seg), cb_(cb), backend_(backend), config_(config), next_id_(turn_id_base) {}

  const ParsedTurn& take_turn(PersonaId agent, Round round, const std::optional<std::string>& peer_output) {
    RawTurn raw;
    raw.turn_id = ++next_id_;
    raw.agent = agent;
    raw.round = round;
    raw.request_key = make_request_key(seg_.id, round, agent, config_.temperature);

    CompletionRequest req;
    req.persona = agent;
    req.temperature = config_.temperature;
    req.max_output_tokens = config_.max_output_tokens;
    req.run_seed = config_.run_seed;
    req.request_key = raw.request_key;
    try {
      req.messages = render_prompt(config_.personas.get(agent), cb_, seg_, peer_output, round);
      auto response = backend_.complete(req);
      raw.raw_text = std::move(response.raw_text);
      raw.backend_id = std::move(response.backend_id);
    } catch (const Error& e) {
      throw SegmentError(e.code(), "turn " + std::to_string(raw.turn_id) + " (" + std::string(to_string(agent)) +
                                       "/" + std::string(to_string(round)) + "): " + e.what(),
                         raw_turns_);
    }
    raw_turns_.push_back(raw);

    try {
      turns_.push_back(parse_turn(raw_turns_.back().raw_text, cb_, {raw.turn_id, agent, round}, config_.parse));
    } catch (const Error& e) {
      throw SegmentError(Errc::TurnParseFailure, "turn " + std::to_string(raw.turn_id) + " (" +
                                                     std::string(to_string(agent)) + "/" +
                                                     std::string(to_string(round)) + "): " + e.what(),
                         raw_turns_);
    }
    return turns_.back();
  }

  const std::string& raw_of(std::size_t turn_index) const { return raw_turns_.at(turn_index).raw_text; }

  SegmentDiscussion finish(DecisionMap final_decision, Outcome outcome) {
    SegmentDiscussion d;
    d.segment_id = seg_.id;
    d.run_id = config_.run_id;
    d.temperature = config_.temperature;
    d.raw_turns = std::move(raw_turns_);
    d.turns = std::move(turns_);
    d.final_decision = std::move(final_decision);
    d.outcome = outcome;
    return d;
  }

 private:
  const Segment& seg_;
  const Codebook& cb_;
  LlmBackend& backend_;
  const ProtocolConfig& config_;
  std::uint64_t next_id_;
  std::vector<RawTurn> raw_turns_;
  std::vector<ParsedTurn> turns_;
};

std::string consensus_input(const Discussion& d, bool with_round2) {
  std::string out = "Coder A, round 1:\n" + d.raw_of(0) + "\n\nCoder B, round 1:\n" + d.raw_of(1);
  if (with_round2) out += "\n\nCoder A, round 2:\n" + d.raw_of(2) + "\n\nCoder B, round 2:\n" + d.raw_of(3);
  return out;
}

}  // namespace

SegmentDiscussion run_segment(const Segment& seg, const Codebook& cb, LlmBackend& backend,
                              const ProtocolConfig& config, std::uint64_t turn_id_base) {
  Discussion d(seg, cb, backend, config, turn_id_base);

  const DecisionMap a1 = d.take_turn(PersonaId::coder_a, Round::round1, std::nullopt).decision;
  const DecisionMap b1 = d.take_turn(PersonaId::coder_b, Round::round1, std::nullopt).decision;
  if (a1 == b1) return d.finish(a1, Outcome::round1_consensus);

  const std::string peer_of_a = d.raw_of(1);
  const std::string peer_of_b = d.raw_of(0);
  const DecisionMap a2 = d.take_turn(PersonaId::coder_a, Round::round2, peer_of_a).decision;
  const DecisionMap b2 = d.take_turn(PersonaId::coder_b, Round::round2, peer_of_b).decision;
  if (a2 == b2) return d.finish(a2, Outcome::round2_consensus);

  const DecisionMap final_decision =
      d.take_turn(PersonaId::consensus, Round::consensus, consensus_input(d, true)).decision;
  return d.finish(final_decision, Outcome::arbitrated);
}

RunRecords run_corpus(std::span<const Segment> segments, const Codebook& cb, LlmBackend& backend,
                      const CorpusConfig& config, const std::function<void(const CorpusProgress&)>& on_progress) {
  if (segments.empty()) throw Error(Errc::PreconditionFailed, "no segments to code");
  if (config.temperatures.empty()) throw Error(Errc::PreconditionFailed, "no temperatures configured");
  std::vector<const Segment*> order;
  for (const auto& s : segments) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const Segment* a, const Segment* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->id == order[i - 1]->id) throw Error(Errc::PreconditionFailed, "duplicate segment id " + order[i]->id);
  }

  const std::size_t n_temps = config.temperatures.size();
  const std::size_t total = order.size() * n_temps;
  struct Slot {
    std::optional<SegmentDiscussion> discussion;
    std::optional<SegmentFailure> failure;
  };
  std::vector<Slot> slots(total);

  std::atomic<std::size_t> next{0};
  std::mutex progress_mu;
  CorpusProgress progress{0, total, 0};

  auto worker = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t seg_index = task / n_temps;
      const std::size_t temp_index = task % n_temps;
      const Segment& seg = *order[seg_index];
      ProtocolConfig protocol = config.protocol;
      protocol.temperature = config.temperatures[temp_index];
      const std::uint64_t base = static_cast<std::uint64_t>(task) * 8;
      bool failed = false;
      try {
        slots[task].discussion = run_segment(seg, cb, backend, protocol, base);
      } catch (const SegmentError& e) {
        slots[task].failure = SegmentFailure{seg.id, protocol.run_id, protocol.temperature, e.code(), e.what(),
                                             e.raw_turns()};
        failed = true;
      } catch (const Error& e) {
        slots[task].failure = SegmentFailure{seg.id, protocol.run_id, protocol.temperature, e.code(), e.what(), {}};
        failed = true;
      }
      std::lock_guard lock(progress_mu);
      ++progress.done;
      if (failed) ++progress.failures;
      if (on_progress) on_progress(progress);
    }
  };

  const auto n_workers = static_cast<std::size_t>(std::max(1, config.parallelism));
  std::vector<std::jthread> pool;
  for (std::size_t i = 1; i < std::min(n_workers, total); ++i) pool.emplace_back(worker);
  worker();
  pool.clear();

  RunRecords records;
  for (auto& slot : slots) {
    if (slot.discussion) records.discussions.push_back(std::move(*slot.discussion));
    if (slot.failure) records.failures.push_back(std::move(*slot.failure));
  }
  return records;
}

json to_json(const RawTurn& t, const std::string& segment_id, double temperature) {
  return json{{"turn_id", t.turn_id},
              {"segment_id", segment_id},
              {"temperature", temperature},
              {"agent", to_string(t.agent)},
              {"round", to_string(t.round)},
              {"request_key", t.request_key},
              {"backend_id", t.backend_id},
              {"raw_text", t.raw_text}};
}

json to_json(const SegmentDiscussion& d) {
  json turn_ids = json::array();
  for (const auto& t : d.turns) turn_ids.push_back(t.turn_id);
  return json{{"schema", "discussion/v1"},
              {"segment_id", d.segment_id},
              {"run_id", d.run_id},
              {"temperature", d.temperature},
              {"outcome", to_string(d.outcome)},
              {"turn_ids", std::move(turn_ids)},
              {"final_decision", to_json(d.final_decision)}};
}

json to_json(const SegmentFailure& f) {
  json turn_ids = json::array();
  for (const auto& t : f.raw_turns) turn_ids.push_back(t.turn_id);
  return json{{"schema", "failure/v1"},
              {"segment_id", f.segment_id},
              {"run_id", f.run_id},
              {"temperature", f.temperature},
              {"error", errc_name(f.error)},
              {"message", f.message},
              {"turn_ids", std::move(turn_ids)}};
}

}  // namespace rtrace
