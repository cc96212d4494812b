// Writes the demo corpus: segments.jsonl, a scripted-backend script.jsonl and
// run_config.json. Output is a pure function of the seed.
#include <CLI11.hpp>

#include <array>
#include <iostream>
#include <random>
#include <set>

#include "rtrace/domain.hpp"
#include "rtrace/io.hpp"
#include "rtrace/llm_gateway.hpp"

namespace {

using rtrace::json;

struct DemoSegment {
  const char* speaker;
  const char* text;
  std::set<std::string> codes;
};

const std::vector<DemoSegment>& demo_segments() {
  static const std::vector<DemoSegment> segs = {
      {"tutor", "Hi everyone, welcome back! Can you all hear me okay?", {"Greeting", "Technical or Logistics"}},
      {"tutor", "Good job, that's exactly right.", {"Encouragement"}},
      {"tutor", "Go ahead and fill out the first three problems.", {"Instruction"}},
      {"tutor", "Not quite. Look at the factor pairs of 12 again.", {"Guiding Feedback"}},
      {"tutor", "Remember when we talked about slope last week? What did rise over run mean?",
       {"Aligning to Prior Knowledge", "Understanding/Engagement-Tutor"}},
      {"tutor", "Why do you think we subtract 4 from both sides?", {"Understanding/Engagement-Tutor"}},
      {"tutor", "You're on mute, I can't hear you.", {"Technical or Logistics"}},
      {"tutor", "We have about five minutes left, so let's finish this one.", {"Time Management", "Instruction"}},
      {"tutor", "Nice work everyone, enjoy the rest of your day!", {"Greeting", "Encouragement"}},
      {"tutor", "Try dividing both sides by 3 and tell me what you get.", {"Instruction", "Guiding Feedback"}},
      {"tutor", "Remember, a factor is a number that divides evenly.", {"Aligning to Prior Knowledge"}},
      {"tutor", "Does that make sense to everyone?", {"Understanding/Engagement-Tutor"}},
      {"tutor", "Your screen froze for a second, can you share again?", {"Technical or Logistics"}},
      {"tutor", "You're getting it, keep going!", {"Encouragement"}},
      {"tutor", "Let's move quickly through the warm-up so we have time for the quiz.", {"Time Management"}},
      {"tutor", "Close, but check the sign on the second term.", {"Guiding Feedback"}},
      {"tutor", "Open the worksheet on page four.", {"Instruction"}},
      {"tutor", "What does the y-intercept tell us about the graph?", {"Understanding/Engagement-Tutor"}},
      {"tutor", "Good morning! How was your weekend?", {"Greeting"}},
      {"tutor", "That's a great question, you're thinking like a mathematician.", {"Encouragement"}},
      {"tutor", "We only have ten minutes, so write down your answer now.", {"Time Management", "Instruction"}},
      {"tutor", "Remember the distributive property from Tuesday? Use it here.",
       {"Aligning to Prior Knowledge", "Instruction"}},
      {"tutor", "Almost, you forgot to multiply the 2 through.", {"Guiding Feedback"}},
      {"tutor", "Can you explain how you got negative six?", {"Understanding/Engagement-Tutor"}},
      {"tutor", "Is my audio cutting out?", {"Technical or Logistics"}},
      {"tutor", "Okay bye, see you Thursday.", {"Greeting"}},
      {"tutor", "Excellent, you solved it by yourself.", {"Encouragement"}},
      {"tutor", "Label each step before you solve.", {"Instruction"}},
      {"tutor", "Think about what we learned about like terms, what can we combine?",
       {"Aligning to Prior Knowledge", "Guiding Feedback"}},
      {"student", "Hmm, I'm not sure, is it 8?", {}},
  };
  return segs;
}

const std::vector<std::string> kCodes = {"Greeting",
                                         "Instruction",
                                         "Guiding Feedback",
                                         "Aligning to Prior Knowledge",
                                         "Understanding/Engagement-Tutor",
                                         "Technical or Logistics",
                                         "Encouragement",
                                         "Time Management"};

const std::array<const char*, 4> kSupport = {
    "The utterance fits {code} because the tutor's words match its definition directly.",
    "This reads as {code}: the phrasing is typical of that category in the codebook.",
    "I would apply {code} here since the intent of the line lines up with the examples.",
    "{code} applies, the speaker is clearly doing what the definition describes.",
};
const std::array<const char*, 4> kReject = {
    "{code} does not apply because nothing in the line relates to it.",
    "I see no sign of {code} in this utterance.",
    "Not {code}, the definition requires something the speaker never says.",
    "There is no evidence for {code} here.",
};
const std::array<const char*, 3> kHedge = {
    "{code} might apply, although the wording is ambiguous.",
    "Possibly {code}, but I am not certain the intent is strong enough.",
    "It could arguably be {code} if we read the tone generously.",
};

std::string fill(const char* tmpl, const std::string& code) {
  std::string s = tmpl;
  const auto at = s.find("{code}");
  return s.replace(at, 6, code);
}

// Both coders draw from the same per-(segment, code) phrasing with probability
// `share`; otherwise they pick freely.
struct Phrasing {
  std::mt19937_64& rng;
  std::size_t segment;
  double share;

  template <class Arr>
  const char* pick(const Arr& arr, std::size_t code) {
    if (std::bernoulli_distribution(share)(rng)) return arr[(segment * 7 + code * 3) % arr.size()];
    return arr[std::uniform_int_distribution<std::size_t>(0, arr.size() - 1)(rng)];
  }
  bool mention_absent(std::size_t code) {
    if (std::bernoulli_distribution(share)(rng)) return (segment + code) % 3 == 0;
    return std::bernoulli_distribution(0.35)(rng);
  }
};

std::string render_turn(Phrasing& phrasing, const std::string& style, const std::string& text,
                        const std::set<std::string>& decision, const std::set<std::string>& truth,
                        bool with_think) {
  std::string reasoning = "Okay, the line is: \"" + text + "\". As a " + style + " coder I go code by code.";
  for (std::size_t c = 0; c < kCodes.size(); ++c) {
    const auto& code = kCodes[c];
    const bool on = decision.count(code) > 0;
    const bool contested = on != (truth.count(code) > 0);
    std::string sentence;
    if (on)
      sentence = fill(contested ? phrasing.pick(kHedge, c) : phrasing.pick(kSupport, c), code);
    else if (contested || phrasing.mention_absent(c))
      sentence = fill(phrasing.pick(kReject, c), code);
    if (!sentence.empty()) reasoning += " " + sentence;
  }
  json map = json::object();
  for (const auto& code : kCodes) map[code] = decision.count(code) ? 1 : 0;

  std::string explanation = decision.empty() ? "None of the codes apply." : "Applied:";
  for (const auto& code : decision) explanation += " " + code + ";";
  std::string out;
  if (with_think) out += "<think>\n" + reasoning + "\n</think>\n\n";
  return out + explanation + "\n\n```json\n" + map.dump() + "\n```\n";
}

std::set<std::string> perturb(std::mt19937_64& rng, std::set<std::string> codes) {
  const auto& code = kCodes[std::uniform_int_distribution<std::size_t>(0, kCodes.size() - 1)(rng)];
  if (!codes.erase(code)) codes.insert(code);
  return codes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the demo corpus and scripted backend", "make_demo"};
  std::filesystem::path out_dir;
  std::uint64_t seed = 2024;
  app.add_option("out_dir", out_dir, "Output directory")->required();
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out_dir);
  std::mt19937_64 rng(seed);
  const std::vector<double> temperatures = {0.0, 0.5, 1.0};

  std::vector<json> segments;
  std::vector<json> script;
  const auto& segs = demo_segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "seg-%03zu", i + 1);
    segments.push_back({{"id", id},
                        {"session_id", "session-" + std::to_string(i / 10 + 1)},
                        {"speaker", segs[i].speaker},
                        {"text", segs[i].text},
                        {"index_in_session", i % 10}});

    for (double t : temperatures) {
      Phrasing phrasing{rng, i, 0.85 - 0.3 * t};
      auto add = [&](rtrace::Round round, rtrace::PersonaId who, const std::string& style,
                     const std::set<std::string>& decision, bool with_think = true) {
        script.push_back({{"request_key", rtrace::make_request_key(id, round, who, t)},
                          {"raw_text", render_turn(phrasing, style, segs[i].text, decision, segs[i].codes, with_think)}});
      };
      const auto& truth = segs[i].codes;
      // Disagreement grows with temperature.
      const double p_disagree = 0.3 + 0.2 * t;
      const bool degraded = i == 16 && t == 0.5;
      const auto a1 = truth;
      const auto b1 = std::bernoulli_distribution(p_disagree)(rng) ? perturb(rng, truth) : truth;
      add(rtrace::Round::round1, rtrace::PersonaId::coder_a, "bold", a1, !degraded);
      add(rtrace::Round::round1, rtrace::PersonaId::coder_b, "empathetic", b1);
      if (a1 == b1) continue;
      const bool settle = std::bernoulli_distribution(0.5)(rng);
      const auto b2 = settle ? truth : b1;
      add(rtrace::Round::round2, rtrace::PersonaId::coder_a, "bold", a1);
      add(rtrace::Round::round2, rtrace::PersonaId::coder_b, "empathetic", b2);
      if (settle) continue;
      add(rtrace::Round::consensus, rtrace::PersonaId::consensus, "neutral, balanced", truth);
    }
  }

  json config = {{"run_id", "demo"},
                 {"codebook", "../codebook.json"},
                 {"prompts", "../prompts"},
                 {"input", "segments.jsonl"},
                 {"output_dir", "../../runs"},
                 {"temperatures", temperatures},
                 {"seed", 7},
                 {"tau", 0.94},
                 {"backend", {{"kind", "scripted"}, {"script_path", "script.jsonl"}, {"parallelism", 4}}},
                 {"embedding", {{"kind", "hashed"}, {"dim", 256}, {"max_tokens", 512}}}};

  rtrace::io::write_jsonl(out_dir / "segments.jsonl", segments);
  rtrace::io::write_jsonl(out_dir / "script.jsonl", script);
  rtrace::io::atomic_write(out_dir / "run_config.json", config.dump(2) + "\n");
  std::cout << "wrote " << segments.size() << " segments and " << script.size() << " scripted turns to "
            << out_dir.string() << "\n";
  return 0;
}
