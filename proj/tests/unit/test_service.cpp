#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "mma/export.hpp"
#include "mma/serialization.hpp"
#include "mma/service.hpp"

using namespace mma;
using namespace mma::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mma-service-test-" + random_token());
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Response call(Service& svc, const std::string& method, const std::string& path, const json& body = nullptr) {
  return svc.route({method, path, body.is_null() ? "" : body.dump()});
}

std::string create_demo_study(Service& svc) {
  Response r = call(svc, "POST", "/api/studies", {{"source", fixture_text()}});
  REQUIRE(r.status == 201);
  return r.json()["study_id"];
}

struct Client {
  Service& svc;
  std::string id;
  std::uint64_t seq = 1;

  Response send(const std::string& kind, const json& payload = json::object()) {
    Response r = call(svc, "POST", "/api/sessions/" + id + "/events", {{"seq", seq}, {"kind", kind}, {"payload", payload}});
    if (r.status == 200) ++seq;
    return r;
  }
  json step() { return call(svc, "GET", "/api/sessions/" + id + "/step").json(); }

  /// Answers each prediction with the class the elicited rules imply.
  void predict_round(const Study& s, const RuleSet& rules) {
    for (json st = step(); st["phase"]["name"] == "predicting"; st = step()) {
      PatientProfile p = profile_from_json(st["payload"]["profile"], s.features);
      std::size_t cls = classify(rules, std::vector<double>(s.classes.size(), 0.0), p).label;
      REQUIRE(send("prediction_submitted", {{"item", st["payload"]["item"]}, {"class", s.classes[cls]}}).status == 200);
    }
  }
};

Client start(Service& svc, const std::string& study_id, const std::string& condition, std::uint64_t seed) {
  Response r = call(svc, "POST", "/api/sessions", {{"study_id", study_id}, {"condition", condition}, {"seed", seed}});
  REQUIRE(r.status == 201);
  return Client{svc, r.json()["session_id"]};
}

void through_observations(Client& c) {
  REQUIRE(c.send("briefing_ack").status == 200);
  while (c.step()["phase"]["name"] == "observing") REQUIRE(c.send("observation_ack").status == 200);
}

void full_session(Client& c, const Study& s, const RuleSet& first, const RuleSet& second) {
  through_observations(c);
  REQUIRE(c.send("elicitation_submitted", rules_to_json(first, s)).status == 200);
  c.predict_round(s, s.truth);
  REQUIRE(c.send("intervention_ack").status == 200);
  REQUIRE(c.send("elicitation_submitted", rules_to_json(second, s)).status == 200);
  c.predict_round(s, s.truth);
}

}  // namespace

TEST_CASE("health and unknown routes") {
  TempDir dir;
  Service svc(dir.path);
  Response h = call(svc, "GET", "/api/health");
  CHECK(h.status == 200);
  CHECK(h.json()["format"] == 1);
  CHECK(call(svc, "GET", "/api/nothing").status == 404);
  CHECK(call(svc, "DELETE", "/api/health").status >= 400);
}

TEST_CASE("study upload") {
  TempDir dir;
  Service svc(dir.path);
  Response r = call(svc, "POST", "/api/studies", {{"source", fixture_text()}});
  CHECK(r.status == 201);
  json j = r.json();
  CHECK(j["format"] == 1);
  CHECK(j["fingerprint"] == study_fingerprint(fixture()));
  CHECK(j["study_id"].get<std::string>().size() == 22);
  Response g = call(svc, "GET", "/api/studies/" + j["study_id"].get<std::string>());
  CHECK(g.status == 200);
  CHECK(g.json()["classes"] == json::array({"healthy", "diabetes"}));
  CHECK_FALSE(g.json().contains("rules"));  // the truth stays on the server
  CHECK(g.body.find("R1") == std::string::npos);

  Response bad = call(svc, "POST", "/api/studies", {{"source", "study \"x\" { classes { a } "}});
  CHECK(bad.status == 422);
  CHECK(bad.json()["code"] == "invalid_study");
  CHECK(bad.json()["issues"].size() >= 1);
  CHECK(bad.json()["issues"][0].contains("line"));

  CHECK(call(svc, "POST", "/api/studies", {{"text", "x"}}).status == 400);
  CHECK(svc.route({"POST", "/api/studies", "{not json"}).status == 400);
  CHECK(call(svc, "GET", "/api/studies/nope").status == 404);
}

TEST_CASE("uncoverable study is refused") {
  TempDir dir;
  Service svc(dir.path);
  std::string text = fixture_text();
  text.replace(text.find("count 12"), 8, "count 2");
  Response r = call(svc, "POST", "/api/studies", {{"source", text}});
  CHECK(r.status == 422);
  CHECK(r.json()["code"] == "coverage_unsatisfiable");
}

TEST_CASE("session walk through the api") {
  TempDir dir;
  Service svc(dir.path);
  Study s = fixture();
  std::string study = create_demo_study(svc);
  Client c = start(svc, study, "targeted", 7);
  json st = c.step();
  CHECK(st["phase"]["name"] == "briefing");
  CHECK(st["seq"] == 1);

  through_observations(c);
  st = c.step();
  CHECK(st["phase"]["name"] == "eliciting");
  CHECK(st["payload"]["menu"]["relevance_atoms"].size() == 8);

  Response early = c.send("prediction_submitted", {{"item", 0}, {"class", "healthy"}});
  CHECK(early.status == 409);
  CHECK(early.json()["code"] == "illegal_transition");

  json off = rules_to_json(RuleSet{{s.truth.rules[0]}}, s);
  off["rules"][0]["relevance"] = json::array({{{"feature", "glucose"}, {"op", ">="}, {"value", 700}}});
  Response mv = c.send("elicitation_submitted", off);
  CHECK(mv.status == 422);
  CHECK(mv.json()["code"] == "menu_violation");

  CHECK(call(svc, "GET", "/api/sessions/" + c.id + "/report").status == 409);
  REQUIRE(c.send("elicitation_submitted", rules_to_json(RuleSet{{s.truth.rules[0]}}, s)).status == 200);

  // a replayed sequence number changes nothing
  json before = c.step();
  c.seq -= 1;
  Response dup = c.send("prediction_submitted", {{"item", 0}, {"class", "healthy"}});
  CHECK(dup.status == 409);
  CHECK(dup.json()["code"] == "duplicate_sequence");
  c.seq += 1;
  CHECK(c.step() == before);
  c.seq += 5;
  CHECK(c.send("prediction_submitted", {{"item", 0}, {"class", "healthy"}}).json()["code"] == "sequence_gap");
  c.seq -= 5;
  CHECK(c.send("prediction_submitted", json::array()).status == 400);

  c.predict_round(s, s.truth);
  st = c.step();
  CHECK(st["phase"]["name"] == "intervention");
  CHECK(st["payload"]["texts"].size() == 1);  // only R2 was flawed
  CHECK(st["payload"]["texts"][0].get<std::string>().find("heart_disease is present") != std::string::npos);
  REQUIRE(c.send("intervention_ack").status == 200);
  REQUIRE(c.send("elicitation_submitted", rules_to_json(s.truth, s)).status == 200);
  c.predict_round(s, s.truth);
  CHECK(c.step()["phase"]["name"] == "done");

  Response rep = call(svc, "GET", "/api/sessions/" + c.id + "/report");
  CHECK(rep.status == 200);
  CHECK(rep.json()["pre"]["composite"].get<double>() == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(rep.json()["delta"]["composite"].get<double>() == doctest::Approx(0.3333).epsilon(1e-4));
}

TEST_CASE("unknown sessions and bad session requests") {
  TempDir dir;
  Service svc(dir.path);
  std::string study = create_demo_study(svc);
  CHECK(call(svc, "GET", "/api/sessions/unknown/report").status == 404);
  CHECK(call(svc, "GET", "/api/sessions/unknown/step").status == 404);
  CHECK(call(svc, "POST", "/api/sessions/unknown/events", {{"seq", 1}, {"kind", "briefing_ack"}}).status == 404);
  CHECK(call(svc, "POST", "/api/sessions", {{"study_id", "nope"}, {"condition", "none"}}).status == 404);
  CHECK(call(svc, "POST", "/api/sessions", {{"study_id", study}, {"condition", "loud"}}).status == 400);
  CHECK(call(svc, "POST", "/api/sessions", {{"study_id", study}, {"condition", "none"}, {"seed", -3}}).status == 400);
  Response r = call(svc, "POST", "/api/sessions", {{"study_id", study}, {"condition", "none"}});
  CHECK(r.status == 201);
  std::string id = r.json()["session_id"];
  CHECK(call(svc, "POST", "/api/sessions/" + id + "/events", {{"seq", 1}, {"kind", "dance"}}).status == 400);
}

TEST_CASE("csv export") {
  TempDir dir;
  Service svc(dir.path);
  Study s = fixture();
  std::string study = create_demo_study(svc);
  CHECK(svc.export_csv(study) == std::string(kCsvHeader) + "\n");
  Response http = call(svc, "GET", "/api/studies/" + study + "/export.csv");
  CHECK(http.status == 200);
  CHECK(http.content_type.find("text/csv") == 0);
  CHECK(call(svc, "GET", "/api/studies/nope/export.csv").status == 404);

  Client c = start(svc, study, "full", 7);
  full_session(c, s, RuleSet{{s.truth.rules[0]}}, s.truth);
  Client unfinished = start(svc, study, "none", 8);
  through_observations(unfinished);

  std::string csv = svc.export_csv(study);
  CHECK(csv == std::string(kCsvHeader) + "\n" + c.id + ",full,7,12,0.5,1.0,0.5,0.6667,1.0,1.0,1.0,1.0,0.3333,1.0,1.0,true\n");
  CHECK(csv.find('\r') == std::string::npos);
}

TEST_CASE("csv row for a perfect participant without round two") {
  TempDir dir;
  Service svc(dir.path);
  Study s = fixture();
  std::string study = create_demo_study(svc);
  Client c = start(svc, study, "none", 3);
  through_observations(c);
  REQUIRE(c.send("elicitation_submitted", rules_to_json(s.truth, s)).status == 200);
  c.predict_round(s, s.truth);
  std::string csv = svc.export_csv(study);
  CHECK(csv == std::string(kCsvHeader) + "\n" + c.id + ",none,3,12,1.0,1.0,1.0,1.0,,,,,,1.0,,false\n");
}

TEST_CASE("formatting helpers") {
  CHECK(format_metric(1.0) == "1.0");
  CHECK(format_metric(2.0 / 3.0) == "0.6667");
  CHECK(format_metric(1.0 / 3.0) == "0.3333");
  CHECK(format_metric(-0.00001) == "0.0");
  CHECK(format_metric(0.5) == "0.5");
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("restart serves identical state") {
  TempDir dir;
  Study s = fixture();
  std::string study, done_id, open_id, report, csv;
  json open_step;
  {
    Service svc(dir.path);
    study = create_demo_study(svc);
    Client done = start(svc, study, "targeted", 11);
    full_session(done, s, RuleSet{{s.truth.rules[1]}}, s.truth);
    Client open = start(svc, study, "full", 12);
    through_observations(open);
    done_id = done.id;
    open_id = open.id;
    report = call(svc, "GET", "/api/sessions/" + done_id + "/report").body;
    open_step = open.step();
    csv = svc.export_csv(study);
  }
  // simulate a crash in the middle of an append
  {
    std::ofstream torn(dir.path / "sessions" / (open_id + ".log"), std::ios::app);
    torn << R"({"seq":14,"ts":1,"kind":"elicitation_sub)";
  }
  Service again(dir.path);
  CHECK(again.study_count() == 1);
  CHECK(again.session_count() == 2);
  CHECK(call(again, "GET", "/api/sessions/" + done_id + "/report").body == report);
  CHECK(call(again, "GET", "/api/sessions/" + open_id + "/step").json() == open_step);
  CHECK(again.export_csv(study) == csv);
  // the torn line is gone and the session accepts its next event
  Client resumed{again, open_id, open_step["seq"].get<std::uint64_t>()};
  CHECK(resumed.send("elicitation_submitted", rules_to_json(s.truth, s)).status == 200);
  Service third(dir.path);
  CHECK(call(third, "GET", "/api/sessions/" + open_id + "/step").json()["phase"]["name"] == "predicting");
}
