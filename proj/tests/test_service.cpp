#include "world.hpp"

#include "aml/service/service.hpp"

#include <httplib.h>

#include <fstream>
#include <json.hpp>
#include <thread>

#ifndef AML_SOURCE_DIR
#define AML_SOURCE_DIR "."
#endif

using namespace aml;
using namespace aml::test;
using namespace aml::service;
using nlohmann::json;

namespace {

const Date kDate = ymd(2016, 12, 1);

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void check_golden(const std::string& name, const std::string& text) {
  auto path = std::filesystem::path(AML_SOURCE_DIR) / "tests" / "golden" / name;
  if (std::getenv("AML_WRITE_GOLDENS")) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
  }
  REQUIRE(std::filesystem::exists(path));
  CHECK(slurp(path) == text);
}

struct Server {
  std::unique_ptr<httplib::Server> srv;
  std::thread thread;
  int port = 0;

  explicit Server(aml::service::Service& svc) : srv(make_http_server(svc)) {
    port = srv->bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { srv->listen_after_bind(); });
    srv->wait_until_ready();
  }
  ~Server() {
    srv->stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    return c;
  }
};

json body(const httplib::Result& r) { return json::parse(r->body); }

// with AML_API_SAMPLES set, bodies land there for the schema check
json sample(const std::string& def, json j) {
  static int n = 0;
  if (const char* dir = std::getenv("AML_API_SAMPLES")) {
    std::filesystem::create_directories(dir);
    std::ofstream(std::filesystem::path(dir) / (def + "-" + std::to_string(++n) + ".json")) << j.dump(2);
  }
  return j;
}

json sample(const std::string& def, const httplib::Result& r) { return sample(def, body(r)); }

}  // namespace

TEST_CASE("reports match the reviewed goldens") {
  auto reports = golden_reports();
  CHECK(reports.size() == 2);
  for (const auto& [name, text] : reports) {
    CAPTURE(name);
    check_golden(name, text);
  }
}

TEST_CASE("report number helpers") {
  CHECK(group_thousands(0) == "0");
  CHECK(group_thousands(999) == "999");
  CHECK(group_thousands(1000) == "1.000");
  CHECK(group_thousands(1234567) == "1.234.567");
  CHECK(group_thousands(-42532) == "-42.532");
  CHECK(percent_half_up(0, 0) == 0);
  CHECK(percent_half_up(1, 3) == 33);
  CHECK(percent_half_up(2, 3) == 67);
  CHECK(percent_half_up(1, 200) == 1);  // 0.5 rounds up
  CHECK(percent_4dp(287, 42532) == "0.6748");
  CHECK(percent_4dp(0, 0) == "0.0000");
  CHECK(percent_4dp(1, 2000000) == "0.0001");  // 0.00005 rounds up
  CHECK(percent_4dp(1, 2000001) == "0.0000");
  CHECK(percent_4dp(5, 5) == "100.0000");
  CHECK(class_label(ProfileClass::Risk2) == "Risco 2");
}

TEST_CASE("run ids are stable and path safe") {
  auto v = *Version::parse("02032017.01");
  auto m = *Version::parse("31122015.01");
  auto a = run_id(kDate, 5.0, "*", std::nullopt, v, m);
  CHECK(a == run_id(kDate, 5.0, "*", std::nullopt, v, m));
  CHECK(a != run_id(kDate, 5.5, "*", std::nullopt, v, m));
  CHECK(a != run_id(kDate, std::nullopt, "*", std::nullopt, v, m));
  CHECK(a != run_id(kDate, 5.0, "CC", std::nullopt, v, m));
  CHECK(a != run_id(kDate, 5.0, "*", std::string("C1"), v, m));
  for (char c : a) CHECK((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.'));
}

TEST_CASE("run store round trip, immutability and reload") {
  const auto& w = world();
  auto dir = scratch_dir("store");
  AnalysisRun r;
  r.id = "r1";
  r.analysis_date = kDate;
  r.mar = std::nullopt;
  r.bank_version = w.bank.version;
  r.model_version = w.models.version;
  r.suspicions = rules::capture(w.window, w.bank, w.models, {kDate, 5.0}).suspicions;
  for (const auto& sp : r.suspicions)
    r.agent_verdicts.push_back({sp.id(), agents::Verdict::Escalated, agents::Source::Agent, "k", "r1"});
  r.by_rule["BCXX2016003"] = {1, 2};
  r.rule_texts["BCXX2016003"] = {"t", "c"};
  r.errors = {"PP: x"};
  r.started_at = "2017-03-02T20:00:00Z";
  CHECK(run_from_json(to_json(r)) == r);
  {
    RunStore s(dir / "store.jsonl");
    s.put(r);
    CHECK_THROWS_AS(s.put(r), ConflictError);
    auto r2 = r;
    r2.id = "r2";
    s.put(r2);
  }
  RunStore again(dir / "store.jsonl");
  CHECK(again.ids() == std::vector<std::string>{"r1", "r2"});
  CHECK(again.get("r1") == r);
  CHECK_FALSE(again.get("r3"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("service without a model asks for learning first") {
  DataLayout l{scratch_dir("empty")};
  Service svc(config_for(l));
  CHECK_THROWS_AS(svc.ensure_ready(), ConfigError);
  CHECK_THROWS_AS(svc.get_run("nope"), NotFoundError);
  std::filesystem::remove_all(l.root);
}

TEST_CASE("service runs, reuses and reports") {
  auto l = workspace("svc");
  {
    Service svc(config_for(l));
    bool reused = true;
    auto run = svc.run_analysis({kDate, 5.0, "*", std::nullopt}, &reused);
    CHECK_FALSE(reused);
    CHECK_FALSE(run.suspicions.empty());
    CHECK(run.agent_verdicts.size() == run.suspicions.size());
    CHECK(run.normative_rules == 5);
    CHECK(run.profile_rules == 20);
    CHECK(run.errors.empty());
    std::size_t listed = 0;
    for (const auto& [rule, ords] : run.by_rule) {
      CHECK(run.rule_texts.count(rule));
      for (auto n : ords) {
        REQUIRE(n >= 1);
        REQUIRE(n <= run.suspicions.size());
        bool has = false;
        for (const auto& m : run.suspicions[n - 1].triggered) has |= m.rule_id == rule;
        CHECK(has);
        ++listed;
      }
    }
    CHECK(listed >= run.suspicions.size());
    auto again = svc.run_analysis({kDate, 5.0, "*", std::nullopt}, &reused);
    CHECK(reused);
    CHECK(again == run);
    CHECK_THROWS_AS(svc.run_analysis({kDate, 100.0, "*", std::nullopt}), ValidationError);

    auto text = svc.report(run.id);
    CHECK(text.find(run.suspicions[0].key.client_id) == std::string::npos);
    auto one = svc.report(run.id, run.by_rule.begin()->first);
    CHECK(one.size() < text.size());

    auto base = svc.run_analysis({kDate, std::nullopt, "*", std::nullopt});
    CHECK(base.id != run.id);
    CHECK(base.suspicions.size() <= run.suspicions.size());
  }
  // a second process sees the same runs
  Service svc2(config_for(l));
  CHECK(svc2.run_ids().size() == 2);
  std::filesystem::remove_all(l.root);
}

TEST_CASE("http api: runs, queue, verdicts and errors") {
  auto l = workspace("http");
  auto cfg = config_for(l);
  cfg.token = "s3cret";
  Service svc(cfg);
  Server server(svc);
  auto cli = server.client();
  httplib::Headers auth = {{"Authorization", "Bearer s3cret"}};

  CHECK(cli.Get("/api/v1/health")->status == 401);
  auto h = cli.Get("/api/v1/health", auth);
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(sample("health", h)["status"] == "ok");
  CHECK(cli.Get("/api/v1/nowhere", auth)->status == 404);
  CHECK(sample("error", cli.Get("/api/v1/nowhere", auth))["error"]["code"] == "not_found");

  auto bad = cli.Post("/api/v1/runs", auth, "{\"mar\": 5}", "application/json");
  CHECK(bad->status == 400);
  CHECK(sample("error", bad)["error"].contains("message"));
  CHECK(cli.Post("/api/v1/runs", auth, "not json", "application/json")->status == 400);
  CHECK(cli.Post("/api/v1/runs", auth, R"({"analysis_date":"2016-12-01","mar":150})", "application/json")->status ==
        400);

  auto created = cli.Post("/api/v1/runs", auth, R"({"analysis_date":"2016-12-01","mar":5})", "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 201);
  auto run = sample("run", created);
  sample("run_request", json::parse(R"({"analysis_date":"2016-12-01","mar":5})"));
  const std::string id = run["id"];
  CHECK(run["mar"] == 5.0);
  CHECK(cli.Post("/api/v1/runs", auth, R"({"analysis_date":"2016-12-01","mar":5})", "application/json")->status ==
        200);
  CHECK(cli.Get("/api/v1/runs/" + id, auth)->status == 200);
  CHECK(cli.Get("/api/v1/runs/none", auth)->status == 404);
  auto listed = sample("run_list", cli.Get("/api/v1/runs", auth));
  CHECK(listed["runs"].size() == 1);

  auto q = sample("queue", cli.Get("/api/v1/runs/" + id + "/queue", auth));
  const std::size_t total = q["total"];
  REQUIRE(total > 1);
  CHECK(q["items"].size() == total);
  CHECK(q["escalated"] == total);  // nothing learned yet
  CHECK(cli.Get("/api/v1/runs/" + id + "/queue?class=Nope", auth)->status == 400);
  std::string rule = q["items"][0]["rules"][0];
  auto qr = body(cli.Get("/api/v1/runs/" + id + "/queue?rule=" + rule, auth));
  for (const auto& it : qr["items"]) {
    bool has = false;
    for (const auto& r : it["rules"]) has |= r == rule;
    CHECK(has);
  }

  auto item = sample("item", cli.Get("/api/v1/runs/" + id + "/items/1", auth));
  CHECK(item["state"] == "Escalated");
  CHECK(item["suspicion"]["key"]["client_id"] == "██████");
  CHECK(cli.Get("/api/v1/runs/" + id + "/items/0", auth)->status == 404);
  CHECK(cli.Get("/api/v1/runs/" + id + "/items/" + std::to_string(total + 1), auth)->status == 404);

  auto path = "/api/v1/runs/" + id + "/items/1/verdict";
  CHECK(cli.Post(path, auth, R"({"verdict":"Escalated"})", "application/json")->status == 400);
  CHECK(cli.Post(path, auth, R"({})", "application/json")->status == 400);
  auto v = cli.Post(path, auth, R"({"verdict":"Confirmed"})", "application/json");
  REQUIRE(v->status == 200);
  CHECK(sample("item", v)["state"] == "AnalystDecided");
  sample("verdict_request", json{{"verdict", "Confirmed"}});
  CHECK(body(v)["analyst_verdict"] == "Confirmed");
  auto twice = cli.Post(path, auth, R"({"verdict":"Rejected"})", "application/json");
  CHECK(twice->status == 409);
  CHECK(sample("error", twice)["error"]["message"].get<std::string>().find("already decided") != std::string::npos);
  CHECK(cli.Post("/api/v1/runs/none/items/1/verdict", auth, R"({"verdict":"Confirmed"})", "application/json")
            ->status == 404);

  auto analyst = body(cli.Get("/api/v1/runs/" + id + "/queue?state=AnalystDecided", auth));
  CHECK(analyst["count"] == 1);

  // the analyst verdicts train the matrix; a second run decides alone where it can
  for (std::size_t n = 2; n <= total; ++n) {
    auto it = body(cli.Get("/api/v1/runs/" + id + "/items/" + std::to_string(n), auth));
    if (it["state"] != "Escalated") continue;
    auto r = cli.Post("/api/v1/runs/" + id + "/items/" + std::to_string(n) + "/verdict", auth,
                      R"({"verdict":"Rejected"})", "application/json");
    CHECK(r->status == 200);
  }
  auto m = sample("decision_matrix", cli.Get("/api/v1/decision-matrix", auth));
  CHECK(m["cells"].size() > 0);

  auto second = cli.Post("/api/v1/runs", auth, R"({"analysis_date":"2016-12-01","mar":20})", "application/json");
  REQUIRE(second->status == 201);
  const std::string id2 = body(second)["id"];
  auto q2 = sample("queue", cli.Get("/api/v1/runs/" + id2 + "/queue", auth));
  std::size_t analyst_kept = 0, agent_decided = 0;
  for (std::size_t n = 1; n <= q2["total"].get<std::size_t>(); ++n) {
    auto it = body(cli.Get("/api/v1/runs/" + id2 + "/items/" + std::to_string(n), auth));
    const bool trained = m["cells"].contains(it["matrix_key"].get<std::string>());
    analyst_kept += it["state"] == "AnalystDecided";
    if (it["state"] == "AgentDecided") {
      ++agent_decided;
      CHECK(it["agent_verdict"] == "Rejected");
    }
    // a key with a trained cell never reaches the analyst again
    if (it["state"] == "Escalated") CHECK_FALSE(trained);
    if (it["state"] == "AgentDecided") CHECK(trained);
  }
  // every first-run case reappears with its analyst verdict
  CHECK(analyst_kept == total);
  MESSAGE("second run: ", q2["total"], " items, ", agent_decided, " decided by the agent");

  auto rep = cli.Get("/api/v1/runs/" + id + "/report", auth);
  CHECK(rep->status == 200);
  CHECK(rep->get_header_value("Content-Type").rfind("text/plain", 0) == 0);
  auto rules = sample("rule_bank", cli.Get("/api/v1/rules", auth));
  CHECK(rules["rules"].size() == 25);

  auto sug = cli.Post("/api/v1/profile-suggestions", auth, "", "application/json");
  REQUIRE(sug->status == 201);
  const std::string sid = sample("suggestion", sug)["id"];
  CHECK(sample("suggestion_list", cli.Get("/api/v1/profile-suggestions", auth))["suggestions"].size() == 1);
  CHECK(cli.Post("/api/v1/profile-suggestions/none/validation", auth, "{}", "application/json")->status == 404);
  auto val = cli.Post("/api/v1/profile-suggestions/" + sid + "/validation", auth, R"({"accepted":[]})",
                      "application/json");
  CHECK(val->status == 200);
  sample("validation_result", val);
  sample("validation_request", json::parse(R"({"accepted":[]})"));
  CHECK(body(cli.Get("/api/v1/profile-suggestions", auth))["suggestions"].empty());
  std::filesystem::remove_all(l.root);
}
