#include "world.hpp"

#include "aml/agents/runtime.hpp"

#include <set>

using namespace aml;
using namespace aml::test;
using namespace aml::agents;
using profiler::Attribute;

namespace {

std::set<std::string> suspicion_ids(const std::vector<rules::Suspicion>& ss) {
  std::set<std::string> out;
  for (const auto& s : ss) out.insert(s.id());
  return out;
}

// world window plus a copy of some CC accounts under a third product
struct ThreeProducts {
  std::vector<profiler::ClientProfile> window;
  ClientDirectory directory;
};

const ThreeProducts& three_products() {
  static const ThreeProducts t = [] {
    ThreeProducts t;
    const auto& w = world();
    t.window = w.window;
    std::size_t i = 0;
    for (const auto& p : w.window) {
      if (product_of(p.key) != "CC" || i++ % 3) continue;
      auto q = p;
      q.key.account = "INV-" + p.key.client_id;
      t.window.push_back(q);
    }
    for (const auto& p : t.window) t.directory[p.key.client_id].insert(std::string(product_of(p.key)));
    return t;
  }();
  return t;
}

std::unique_ptr<Deployment> deploy(RuntimeOptions ro, bool three = false) {
  const auto& w = world();
  DeploymentOptions o;
  o.runtime = ro;
  o.clock = tick_clock();
  const auto& t = three_products();
  auto window = three ? t.window : w.window;
  auto dir = three ? t.directory : service::client_directory(w.prepared);
  auto d = std::make_unique<Deployment>(o, std::make_shared<const rules::RuleBank>(w.bank),
                                        std::make_shared<const learner::ModelBundle>(w.models),
                                        [window](Date) { return window; }, dir);
  d->add_product("CC");
  d->add_product("PP");
  if (three) d->add_product("INV");
  return d;
}

AnalyzeRequest request(std::string id, std::string product = std::string{kAllProducts}) {
  AnalyzeRequest r;
  r.request_id = std::move(id);
  r.analysis_date = world().analysis_date;
  r.mar = 5.0;
  r.product = std::move(product);
  return r;
}

rules::Suspicion crafted(const std::string& client, double window) {
  rules::Suspicion s;
  s.key = akey(client);
  s.analysis_date = ymd(2016, 12, 1);
  s.analysis_class = ProfileClass::Standard;
  s.profile.key = s.key;
  s.profile[Attribute::Movl] = {20, 3, window};
  s.triggered = {{"PCXX2016001", ""}};
  return s;
}

}  // namespace

TEST_CASE("ratio buckets") {
  CHECK(ratio_bucket(0, 10) == '0');
  CHECK(ratio_bucket(5, 10) == '1');
  CHECK(ratio_bucket(5.01, 10) == '2');
  CHECK(ratio_bucket(10, 10) == '2');
  CHECK(ratio_bucket(10.5, 10) == '3');
  CHECK(ratio_bucket(1, 0) == '3');
  auto s = crafted("C1", 25);
  CHECK(matrix_key(s).rfind("PCXX2016001|Standard|", 0) == 0);
  CHECK(attribute_signature(s.profile).size() == profiler::kAttributeCount);
}

TEST_CASE("decision matrix: support and agreement") {
  DecisionMatrix m({0.9, 5});
  CHECK(m.decide("k") == Verdict::Escalated);
  m.apply({"k", 4, 0});
  CHECK(m.decide("k") == Verdict::Escalated);
  m.apply({"k", 1, 0});
  CHECK(m.decide("k") == Verdict::Confirmed);
  m.apply({"k", 0, 1});  // 5 of 6 is below 0.9
  CHECK(m.decide("k") == Verdict::Escalated);
  m.apply({"r", 0, 9});
  m.apply({"r", 1, 0});
  CHECK(m.decide("r") == Verdict::Rejected);
  CHECK_THROWS_AS(m.apply({"", 1, 0}), ValidationError);
  DecisionMatrix n({0.9, 5});
  n.apply({"r", 1, 9});
  n.apply({"k", 5, 1});
  CHECK(m.canonical() == n.canonical());
}

TEST_CASE("decision engine: escalation, analyst verdicts, learned cells") {
  DecisionEngine e({0.9, 3}, tick_clock(), std::nullopt);
  // five clients share one matrix key
  std::vector<rules::Suspicion> ss;
  for (int i = 0; i < 5; ++i) ss.push_back(crafted("C" + std::to_string(i), 25));
  for (int i = 0; i < 3; ++i) {
    auto o = e.assess(ss[i], "r1");
    CHECK(o.verdict == Verdict::Escalated);
    CHECK(o.source == Source::Agent);
  }
  CHECK(e.pending().size() == 3);
  CHECK_THROWS_AS(e.record_analyst(ss[0].id(), Verdict::Escalated), ValidationError);
  CHECK_THROWS_AS(e.record_analyst("nope", Verdict::Confirmed), NotFoundError);
  for (int i = 0; i < 3; ++i) CHECK(e.record_analyst(ss[i].id(), Verdict::Confirmed).source == Source::Analyst);
  CHECK_THROWS_AS(e.record_analyst(ss[0].id(), Verdict::Rejected), ConflictError);
  CHECK(e.pending().empty());

  // the cell now decides on its own
  auto o = e.assess(ss[3], "r2");
  CHECK(o.verdict == Verdict::Confirmed);
  CHECK(o.source == Source::Agent);
  CHECK_THROWS_AS(e.record_analyst(ss[3].id(), Verdict::Rejected), ConflictError);
  // an analyst verdict sticks across runs
  auto again = e.assess(ss[0], "r3");
  CHECK(again.verdict == Verdict::Confirmed);
  CHECK(again.source == Source::Analyst);
  // a case seen before but still waiting does not log again
  auto before = e.log().size();
  auto other = crafted("D", 2);
  other.profile[Attribute::Serv] = {1, 1, 1};
  e.assess(other, "r3");
  e.assess(other, "r4");
  CHECK(e.log().size() == before + 1);
  CHECK(e.matrix().cell(matrix_key(ss[0]))->confirmed == 3);
}

TEST_CASE("decision log replays into the same matrix; agent records teach nothing") {
  auto dir = scratch_dir("declog");
  auto file = dir / "decisions.ndjson";
  std::string canonical;
  std::vector<DecisionRecord> log;
  {
    DecisionEngine e({0.9, 2}, tick_clock(), file);
    for (int i = 0; i < 6; ++i) {
      auto s = crafted("C" + std::to_string(i), 10 + i % 2 * 20);
      e.assess(s, "r1");
      if (i < 4 && e.status(s.id())->state == CaseState::Escalated)
        e.record_analyst(s.id(), i % 2 ? Verdict::Rejected : Verdict::Confirmed);
    }
    canonical = e.matrix().canonical();
    log = e.log();
  }
  CHECK(read_decision_log(file) == log);
  CHECK(replay(log, {0.9, 2}).canonical() == canonical);
  DecisionEngine reopened({0.9, 2}, tick_clock(), file);
  CHECK(reopened.matrix().canonical() == canonical);
  CHECK(reopened.log() == log);
  CHECK(reopened.status(crafted("C0", 10).id())->state == CaseState::AnalystDecided);

  for (const auto& r : log) {
    CHECK(learn(r).empty() == (r.source == Source::Agent));
    CHECK(record_from_json(to_json(r)) == r);
  }
  auto bad = log.front();
  bad.source = Source::Analyst;
  bad.verdict = Verdict::Escalated;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("messages round trip through JSON") {
  const auto& w = world();
  auto s = rules::capture(w.window, w.bank, w.models, {w.analysis_date, 5.0}).suspicions.at(0);
  AnalyzeRequest ar = request("q1", "CC");
  ar.mode = ScanMode::ByClient;
  ar.client_id = "C00001";
  ar.bank_version = w.bank.version;
  ScanResult sr{"q1", "CC", std::string("C00001"), {s}, 9, {}, std::string("oops")};
  sr.phase1[ClientKind::SingularPerson].original[1] = 4;
  std::vector<Message> msgs = {
      ar,
      sr,
      SuspicionFound{"q1", "PP", s},
      ClientScanRequest{"q1", "C00001", "PP", "CC", w.analysis_date, std::nullopt, w.bank.version},
      AllScansComplete{"q1", {s}, 100, {}, {"CC", "PP"}, {"PP: late"}},
      RequestRejected{"q1", "why"},
      DecisionOutcome{s.id(), Verdict::Rejected, Source::Analyst, "k", "q1"},
      ProfileSuggestion{"S1", {{"S1-1", ProfileCandidate::Kind::Shifted, ClientKind::LegalEntity, 2,
                                {0.5, -1}, {10, 20}, 7, 1.25, ProfileClass::Risk2}}, "n"},
      ProfileValidation{"S1", {"S1-1"}, {}},
  };
  for (const auto& m : msgs) {
    CAPTURE(message_type(m));
    auto j = message_to_json(m);
    auto back = message_from_json(j);
    CHECK(back.index() == m.index());
    CHECK(message_to_json(back) == j);
    Envelope e{cts_id("CC"), gct_id(), m, 42};
    CHECK(to_json(envelope_from_json(to_json(e))) == to_json(e));
  }
  CHECK(AgentId::parse("CTS:PP") == cts_id("PP"));
  CHECK(AgentId::parse(gct_id().to_string()) == gct_id());
  CHECK_FALSE(AgentId::parse("Boss"));
}

TEST_CASE("deployment reproduces a direct capture") {
  const auto& w = world();
  auto d = deploy({});
  auto o = d->analyze(request("run-1"));
  REQUIRE(o.complete);
  CHECK_FALSE(o.rejected);
  auto direct = rules::capture(w.window, w.bank, w.models, {w.analysis_date, 5.0});
  CHECK(suspicion_ids(o.complete->suspicions) == suspicion_ids(direct.suspicions));
  CHECK(o.complete->scanned == direct.analyzed);
  CHECK(o.complete->phase1 == direct.phase1);
  CHECK(o.complete->products == std::vector<std::string>{"CC", "PP"});
  CHECK(o.complete->errors.empty());
  CHECK(o.decisions.size() == o.complete->suspicions.size());
  // nothing learned yet, every case goes to an analyst
  for (const auto& dec : o.decisions) CHECK(dec.verdict == Verdict::Escalated);
  CHECK(d->runtime().undeliverable().empty());
}

TEST_CASE("property: delivery order and duplicates do not change the outcome") {
  auto reference = deploy({.seed = 1, .shuffle = false})->analyze(request("r", "PP"));
  REQUIRE(reference.complete);
  for (std::uint64_t seed = 2; seed < 10; ++seed) {
    CAPTURE(seed);
    auto d = deploy({.seed = seed, .shuffle = true, .duplicate_probability = 0.25}, true);
    auto ref3 = deploy({.seed = 1, .shuffle = false}, true)->analyze(request("r", "PP"));
    auto o = d->analyze(request("r", "PP"));
    REQUIRE(o.complete);
    CHECK(suspicion_ids(o.complete->suspicions) == suspicion_ids(ref3.complete->suspicions));
    CHECK(o.complete->scanned == ref3.complete->scanned);
    CHECK(o.decisions.size() == ref3.decisions.size());
    CHECK(d->decisions().log().size() == o.decisions.size());
  }
}

TEST_CASE("three products: a suspect in one product pulls in its other accounts") {
  const auto& t = three_products();
  RuntimeOptions ro;
  ro.keep_trace = true;
  auto d = deploy(ro, true);
  auto o = d->analyze(request("inv-only", "INV"));
  REQUIRE(o.complete);
  CHECK(o.complete->products == std::vector<std::string>{"INV"});
  // count the window accounts by product to know what the primary scan covers
  std::size_t inv = 0;
  for (const auto& p : t.window) inv += product_of(p.key) == "INV";
  CHECK(o.complete->scanned == inv);

  std::set<std::string> suspect_clients, pulled_products;
  for (const auto& s : o.complete->suspicions) {
    suspect_clients.insert(s.key.client_id);
    pulled_products.insert(std::string(product_of(s.key)));
  }
  // every client scan in the trace targets a suspect client and another product
  std::size_t client_scans = 0;
  for (const auto& j : d->runtime().trace()) {
    auto e = envelope_from_json(j);
    if (auto* c = std::get_if<ClientScanRequest>(&e.message)) {
      ++client_scans;
      CHECK(suspect_clients.count(c->client_id));
      CHECK(c->product != "INV");
      CHECK(e.to == cts_id(c->product));
    }
  }
  CHECK(client_scans > 0);
  CHECK(pulled_products.count("INV"));

  // by client: every product of that client is scanned
  std::string client;
  for (const auto& [c, prods] : t.directory)
    if (prods.size() == 3) {
      client = c;
      break;
    }
  REQUIRE_FALSE(client.empty());
  auto byc = request("one-client");
  byc.mode = ScanMode::ByClient;
  byc.client_id = client;
  auto oc = d->analyze(byc);
  REQUIRE(oc.complete);
  CHECK(oc.complete->products == std::vector<std::string>{"CC", "INV", "PP"});
  CHECK(oc.complete->scanned == 3);
}

TEST_CASE("manager rejects bad requests and ignores repeats") {
  auto d = deploy({});
  auto o = d->analyze(request("x", "GOLD"));
  REQUIRE(o.rejected);
  CHECK(o.rejected->reason.find("GOLD") != std::string::npos);
  auto noclient = request("y");
  noclient.mode = ScanMode::ByClient;
  CHECK(d->analyze(noclient).rejected);
  CHECK(d->analyze(request("")).rejected);
  REQUIRE(d->analyze(request("z")).complete);
  auto again = d->analyze(request("z"));
  CHECK_FALSE(again.complete);
  CHECK_FALSE(again.rejected);
  CHECK_THROWS_AS(d->add_product("CC"), ConflictError);
  CHECK_THROWS_AS(d->remove_product("GOLD"), NotFoundError);
}

TEST_CASE("a pinned bank the agents lack shows up as an error entry") {
  auto d = deploy({});
  auto r = request("pinned");
  r.bank_version = *Version::parse("01012030.01");
  auto o = d->analyze(r);
  REQUIRE(o.complete);
  CHECK(o.complete->errors.size() == 2);
  CHECK(o.complete->suspicions.empty());
}

TEST_CASE("removing a product completes the requests waiting on it") {
  const auto& w = world();
  Runtime rt({.seed = 3});
  auto gct = std::make_shared<CaptureManager>(service::client_directory(w.prepared));
  gct->add_product("CC");
  gct->add_product("PP");
  auto window = w.window;
  rt.add(gct);
  rt.add(std::make_shared<CaptureAgent>("CC", [window](Date) { return window; },
                                        std::make_shared<const rules::RuleBank>(w.bank),
                                        std::make_shared<const learner::ModelBundle>(w.models)));
  // no PP agent: its envelope goes nowhere and the request waits
  rt.post(external_id(), gct_id(), request("wait"));
  rt.run();
  CHECK(rt.take_external().empty());
  REQUIRE(rt.undeliverable().size() >= 1);
  Outbox out;
  gct->remove_product("PP", out);
  rt.post_all(gct_id(), out);
  rt.run();
  auto ext = rt.take_external();
  REQUIRE(ext.size() == 1);
  auto* done = std::get_if<AllScansComplete>(&ext[0].message);
  REQUIRE(done);
  REQUIRE(done->errors.size() == 1);
  CHECK(done->errors[0].rfind("PP:", 0) == 0);
  CHECK(done->products == std::vector<std::string>{"CC", "PP"});
  CHECK(gct->products() == std::set<std::string>{"CC"});
}

TEST_CASE("analyst verdicts go through the decision agent") {
  auto d = deploy({});
  auto o = d->analyze(request("v1"));
  REQUIRE(o.decisions.size() >= 2);
  auto id = o.decisions[0].suspicion_id;
  auto v = d->verdict(id, Verdict::Rejected);
  CHECK(v.source == Source::Analyst);
  CHECK(v.verdict == Verdict::Rejected);
  CHECK_THROWS_AS(d->verdict(id, Verdict::Confirmed), ConflictError);
  CHECK_THROWS_AS(d->verdict("2016-12-01/none/0/none", Verdict::Confirmed), NotFoundError);
  CHECK_THROWS_AS(d->verdict(o.decisions[1].suspicion_id, Verdict::Escalated), ValidationError);
  // the same date again keeps the analyst verdict
  auto o2 = d->analyze(request("v2"));
  for (const auto& dec : o2.decisions)
    if (dec.suspicion_id == id) CHECK(dec.source == Source::Analyst);
}

TEST_CASE("runtime refuses a second agent with the same id") {
  Runtime rt;
  rt.add(std::make_shared<CaptureManager>(ClientDirectory{}));
  CHECK_THROWS_AS(rt.add(std::make_shared<CaptureManager>(ClientDirectory{})), ConfigError);
  CHECK(rt.has(gct_id()));
  rt.remove(gct_id());
  CHECK_FALSE(rt.has(gct_id()));
}
