#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "rtrace/api.hpp"
#include "rtrace/error.hpp"
#include "rtrace/store_triage.hpp"
#include "server.hpp"
#include "support.hpp"

using namespace rtrace;
using testing::codebook8;

namespace {

// Demo run plus three open cases: one between-align, one within-misalign, one manual.
struct ApiFixture {
  testing::TempDir tmp{"rtrace-api"};
  std::vector<TriageCase> cases;

  ApiFixture() {
    testing::demo_run(tmp.path());
    RunStore store(tmp.path());
    const auto turns = store.parsed_turns(codebook8());
    const auto pairs = store.comparisons();
    const CaseReason reasons[] = {CaseReason::manual, CaseReason::within_misalign_band,
                                  CaseReason::between_align_band};
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& p = pairs.at(i * 7);
      TriageCase c;
      c.case_id = "case-" + std::to_string(i);
      c.pair = p;
      c.turn_a = turns.at(p.turn_ids.first);
      c.turn_b = turns.at(p.turn_ids.second);
      c.reason = reasons[i];
      c.priority = prioritize(c, 0.94);
      cases.push_back(c);
    }
    store.add_cases(cases);
  }
};

json adjudication_body(const std::string& reviewer = "ana") {
  return json{{"reviewer", reviewer}, {"resolved_decision", {{"Greeting", 1}}}, {"codebook_note", "n"}};
}

}  // namespace

TEST_CASE("api handler") {
  ApiFixture f;
  ApiService api(f.tmp.path());
  CHECK(api.tau() == 0.94);

  SUBCASE("manifest") {
    const auto r = api.handle("GET", "/api/manifest", {}, {});
    CHECK(r.status == 200);
    CHECK(r.body["run_id"] == "demo");
    CHECK(r.body["counts"]["segments"] == 30);
  }

  SUBCASE("stats") {
    const auto r = api.handle("GET", "/api/stats", {}, {});
    CHECK(r.status == 200);
    CHECK(r.body["quadrants"]["total"].get<std::size_t>() > 0);
    CHECK(r.body["validation"].contains("rho"));
    CHECK(r.body["adjudication"]["open"] == 3);
    ApiService other(f.tmp.path(), 0.5);
    CHECK(other.handle("GET", "/api/stats", {}, {}).body["threshold"]["tau"] == 0.5);
  }

  SUBCASE("distribution") {
    const auto r = api.handle("GET", "/api/codes/Greeting/distribution", {}, {});
    CHECK(r.status == 200);
    CHECK(r.body["code"] == "Greeting");
    CHECK(r.body["histogram"].size() == 50);
    CHECK(api.handle("GET", "/api/codes/GF/distribution", {}, {}).body["code"] == "Guiding Feedback");
    CHECK(api.handle("GET", "/api/codes/Understanding%2FEngagement-Tutor/distribution", {}, {}).status == 200);
    CHECK(api.handle("GET", "/api/codes/Understanding/Engagement-Tutor/distribution", {}, {}).status == 200);
    CHECK(api.handle("GET", "/api/codes/Time%20Management/distribution", {}, {}).status == 200);
    const auto bad = api.handle("GET", "/api/codes/Nope/distribution", {}, {});
    CHECK(bad.status == 404);
    CHECK(bad.body["error"] == "UnknownCode");
  }

  SUBCASE("queue is sorted by priority then id") {
    const auto r = api.handle("GET", "/api/queue", {{"status", "open"}}, {});
    REQUIRE(r.status == 200);
    REQUIRE(r.body["items"].size() == 3);
    CHECK(r.body["total"] == 3);
    double last = 1e9;
    for (const auto& item : r.body["items"]) {
      CHECK(item["priority"].get<double>() <= last);
      last = item["priority"].get<double>();
    }
    CHECK(r.body["items"][0]["case_id"] == "case-2");
    CHECK(r.body["items"][2]["case_id"] == "case-0");
    CHECK(api.handle("GET", "/api/queue", {{"limit", "1"}}, {}).body["items"].size() == 1);
    CHECK(api.handle("GET", "/api/queue", {{"limit", "x"}}, {}).status == 400);
    CHECK(api.handle("GET", "/api/queue", {{"status", "weird"}}, {}).status == 400);
  }

  SUBCASE("case detail") {
    const auto r = api.handle("GET", "/api/cases/case-1", {}, {});
    REQUIRE(r.status == 200);
    CHECK(r.body["case_id"] == "case-1");
    CHECK(r.body["turn_a"].contains("reasoning_units"));
    CHECK(r.body["turn_b"].contains("reasoning"));
    CHECK(r.body["segment"]["id"] == f.cases[1].pair.segment_id);
    CHECK(r.body["pair"].contains("per_code_cs"));
    CHECK(r.body["adjudications"].empty());
    const auto missing = api.handle("GET", "/api/cases/unknown", {}, {});
    CHECK(missing.status == 404);
    CHECK(missing.body["error"] == "CaseNotFound");
  }

  SUBCASE("adjudication transitions") {
    const auto ok = api.handle("POST", "/api/cases/case-1/adjudication", {}, adjudication_body().dump());
    CHECK(ok.status == 200);
    CHECK(ok.body["status"] == "adjudicated");
    const auto again = api.handle("POST", "/api/cases/case-1/adjudication", {}, adjudication_body("ben").dump());
    CHECK(again.status == 409);
    CHECK(again.body["error"] == "AlreadyResolved");
    CHECK(api.handle("POST", "/api/cases/nope/adjudication", {}, adjudication_body().dump()).status == 404);

    json unknown = adjudication_body();
    unknown["resolved_decision"] = {{"Made Up", 1}};
    const auto r422 = api.handle("POST", "/api/cases/case-0/adjudication", {}, unknown.dump());
    CHECK(r422.status == 422);
    CHECK(r422.body["fields"] == json::array({"resolved_decision"}));
    const auto no_reviewer = api.handle("POST", "/api/cases/case-0/adjudication", {}, R"({"resolved_decision":{}})");
    CHECK(no_reviewer.status == 422);
    CHECK(no_reviewer.body["fields"] == json::array({"reviewer"}));
    CHECK(api.handle("POST", "/api/cases/case-0/adjudication", {}, "not json").status == 422);

    CHECK(api.handle("GET", "/api/queue", {}, {}).body["total"] == 2);
    CHECK(api.handle("GET", "/api/queue", {{"status", "adjudicated"}}, {}).body["total"] == 1);
    const auto stats = api.handle("GET", "/api/stats", {}, {}).body["adjudication"];
    CHECK(stats["adjudicated"] == 1);
    CHECK(stats["compared"] == 1);
    CHECK(api.handle("GET", "/api/cases/case-1", {}, {}).body["adjudications"].size() == 1);
  }

  SUBCASE("unknown routes") {
    CHECK(api.handle("GET", "/api/nothing", {}, {}).status == 404);
    CHECK(api.handle("DELETE", "/api/manifest", {}, {}).status == 404);
    CHECK(api.handle("GET", "/", {}, {}).status == 404);
  }
}

TEST_CASE("api service on an empty run directory") {
  testing::TempDir tmp;
  RunStore store(tmp.path());
  store.write_json("config.json", json{{"codebook", to_json(codebook8())}, {"tau", 0.9}});
  ApiService api(tmp.path());
  const auto r = api.handle("GET", "/api/stats", {}, {});
  CHECK(r.status == 200);
  CHECK(r.body["n_pairs"] == 0);
  CHECK(r.body["tau"] == 0.9);
  CHECK(api.handle("GET", "/api/queue", {}, {}).body["items"].empty());
}

TEST_CASE("api over a real http server") {
  ApiFixture f;
  ApiService api(f.tmp.path());
  httplib::Server server;
  cli::mount_api(server, api);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto queue = client.Get("/api/queue?status=open&limit=10");
  REQUIRE(queue);
  CHECK(queue->status == 200);
  CHECK(queue->get_header_value("Content-Type") == "application/json");
  CHECK(json::parse(queue->body)["items"].size() == 3);

  auto dist = client.Get("/api/codes/Understanding%2FEngagement-Tutor/distribution");
  REQUIRE(dist);
  CHECK(dist->status == 200);

  auto first = client.Post("/api/cases/case-2/adjudication", adjudication_body().dump(), "application/json");
  REQUIRE(first);
  CHECK(first->status == 200);
  auto second = client.Post("/api/cases/case-2/adjudication", adjudication_body().dump(), "application/json");
  REQUIRE(second);
  CHECK(second->status == 409);
  auto missing = client.Get("/api/cases/unknown");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  thread.join();
}
