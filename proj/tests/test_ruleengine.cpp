#include "world.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace aml;
using namespace aml::test;
using namespace aml::rules;
using profiler::Attribute;

namespace {

profiler::ClientProfile random_profile(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 40);
  std::uniform_real_distribution<double> pct(0, 120);
  profiler::ClientProfile p;
  p.key = akey("R" + std::to_string(rng() % 100000));
  p.account_age_years = static_cast<int>(rng() % 30);
  for (std::size_t i = 0; i < p.attrs.size(); ++i) {
    auto& t = p.attrs[i];
    bool is_pct = i >= static_cast<std::size_t>(Attribute::PctDeb);
    t.monthly_max = is_pct ? pct(rng) : count(rng);
    t.annual_total = is_pct ? pct(rng) : t.monthly_max * (1 + rng() % 12);
    t.window_value = is_pct ? pct(rng) : count(rng);
  }
  return p;
}

bool holds(std::string_view text, const profiler::ClientProfile& p, ProfileClass c = ProfileClass::Standard,
           double mar = 0) {
  auto lim = apply_mar(c, p, mar);
  return Predicate::parse(text).evaluate({p, lim});
}

std::set<std::string> ids(const std::vector<RuleMatch>& ms) {
  std::set<std::string> out;
  for (const auto& m : ms) out.insert(m.rule_id);
  return out;
}

bool promoted(ProfileClass c) { return c == ProfileClass::Risk2 || c == ProfileClass::Risk3; }

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_CASE("mar bounds") {
  CHECK_NOTHROW(validate_mar(0));
  CHECK_NOTHROW(validate_mar(99.9));
  CHECK_THROWS_AS(validate_mar(100), ConfigError);
  CHECK_THROWS_AS(validate_mar(-0.1), ConfigError);
  CHECK_THROWS_AS(validate_mar(std::nan("")), ConfigError);
}

TEST_CASE("effective limits per class") {
  profiler::ClientProfile p;
  p[Attribute::Movl] = {120, 20, 0};
  p[Attribute::PctTed] = {40, 90, 0};
  auto std5 = apply_mar(ProfileClass::Standard, p, 5);
  CHECK(std5[Attribute::Movl] == doctest::Approx(114));
  CHECK(std5[Attribute::PctTed] == doctest::Approx(38));
  auto low = apply_mar(ProfileClass::LowUsage, p, 20);
  CHECK(low[Attribute::Movl] == doctest::Approx(96));
  auto r2 = apply_mar(ProfileClass::Risk2, p, 5);
  CHECK(r2[Attribute::Movl] == doctest::Approx(19));
  CHECK(r2[Attribute::PctTed] == doctest::Approx(85.5));
  auto r3 = apply_mar(ProfileClass::Risk3, p, 50);
  CHECK(r3[Attribute::Movl] == doctest::Approx(10));
  // alert profiles keep their monthly max
  auto r1 = apply_mar(ProfileClass::Risk1, p, 50);
  CHECK(r1[Attribute::Movl] == 20);
  CHECK(r1[Attribute::PctTed] == 90);
  auto base = baseline_limits(ProfileClass::Standard, p);
  CHECK_FALSE(base.mar);
  CHECK(base[Attribute::Movl] == 120);
  CHECK(baseline_limits(ProfileClass::Risk3, p)[Attribute::Movl] == 20);
  CHECK_THROWS_AS(apply_mar(ProfileClass::Standard, p, 100), ConfigError);
}

TEST_CASE("predicate grammar") {
  profiler::ClientProfile p;
  p[Attribute::Movl] = {100, 12, 8};
  p[Attribute::Serv] = {30, 4, 2};
  p[Attribute::Band5] = {6, 2, 3};
  p[Attribute::Band6] = {1, 1, 2};
  p.account_age_years = 7;

  CHECK(holds("movl.window >= 8", p));
  CHECK_FALSE(holds("movl.window > 8", p));
  CHECK(holds("movl.window <= 0.7*movl.max", p));
  CHECK(holds("sum(fxlvr5,fxlvr6).window >= 5", p));
  CHECK_FALSE(holds("sum(fxlvr5,fxlvr6).total >= 8", p));
  CHECK(holds("age >= 7 AND age < 8", p));
  CHECK(holds("2*serv.window >= serv.max", p));
  CHECK(holds("movl.window > 0.05*limit(movl)", p));
  CHECK_FALSE(holds("movl.window > 0.1*limit(movl)", p));

  // AND binds tighter than OR
  CHECK(holds("movl.window > 100 AND serv.window > 100 OR age >= 1", p));
  CHECK_FALSE(holds("movl.window > 100 AND (serv.window > 100 OR age >= 1)", p));
  CHECK(holds("age >= 1 OR movl.window > 100 AND serv.window > 100", p));
}

TEST_CASE("predicate rejects bad text and limit forms that could loosen") {
  for (const char* bad : {"", "movl.window", "movl.window >= ", "movl.window == 3", "nope.window >= 1",
                          "movl.later >= 1", "movl.window >= 1 AND", "(movl.window >= 1", "movl.window >= 1)",
                          "sum().window >= 1", "movl.window >= 1 XOR age > 2", "limit(movl) <= movl.window",
                          "movl.window < limit(movl)", "movl.window <= 2*limit(movl)",
                          "movl.window >= -1*limit(movl)", "limit(movl) >= 3", "movl.window*movl.max >= 1",
                          "movl.window >= limit(movl)*limit(serv)"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(Predicate::parse(bad), ValidationError);
  }
  CHECK(Predicate::parse("movl.window > 2*limit(movl)").uses_limits());
  CHECK_FALSE(Predicate::parse("movl.window > 2*movl.max").uses_limits());
}

TEST_CASE("property: canonical text parses back to the same predicate") {
  std::mt19937_64 rng(41);
  const auto bank = builtin_bank();
  std::vector<std::string> texts;
  for (const auto* list : {&bank.normative, &bank.profile_based})
    for (const auto& r : *list) texts.push_back(r.predicate.source());
  texts.push_back("(movl.window >= 3 OR serv.window > 2) AND (age < 5 OR pctted.window >= 90)");
  texts.push_back("movl.window >= 3 OR serv.window > 2 AND age < 5");
  for (const auto& text : texts) {
    CAPTURE(text);
    auto a = Predicate::parse(text);
    auto b = Predicate::parse(a.to_string());
    CHECK(b.to_string() == a.to_string());
    for (int i = 0; i < 50; ++i) {
      auto p = random_profile(rng);
      auto lim = apply_mar(ProfileClass::Standard, p, 0);
      CHECK(a.evaluate({p, lim}) == b.evaluate({p, lim}));
    }
  }
}

TEST_CASE("builtin bank: five normative rules, twenty profile rules") {
  auto bank = builtin_bank();
  CHECK(bank.version.to_string() == "02032017.01");
  CHECK(bank.normative.size() == 5);
  CHECK(bank.profile_based.size() == 20);
  for (const auto& r : bank.normative) {
    CHECK(r.family() == RuleFamily::Normative);
    CHECK(r.classes.size() == 5);
    CHECK_FALSE(r.citation.empty());
  }
  for (const auto& r : bank.profile_based) {
    CHECK(r.family() == RuleFamily::ProfileBased);
    CHECK(r.predicate.uses_limits());
  }
  REQUIRE(bank.find("PCXX2016017"));
  CHECK(bank.find("PCXX2016017")->classes == std::vector{ProfileClass::Risk1});
  CHECK_FALSE(bank.find("PCXX2016099"));
  CHECK(valid_rule_id("BCXX2016001"));
  CHECK_FALSE(valid_rule_id("XCXX2016001"));
  CHECK_FALSE(valid_rule_id("PCXX201601"));
}

TEST_CASE("bank text round trip and line errors") {
  auto bank = builtin_bank();
  std::ostringstream os;
  write_bank(os, bank);
  std::istringstream is(os.str());
  auto back = parse_bank(is);
  CHECK(back.version == bank.version);
  REQUIRE(back.size() == bank.size());
  for (std::size_t i = 0; i < bank.profile_based.size(); ++i) {
    CHECK(back.profile_based[i].id == bank.profile_based[i].id);
    CHECK(back.profile_based[i].classes == bank.profile_based[i].classes);
    CHECK(back.profile_based[i].predicate.to_string() == bank.profile_based[i].predicate.to_string());
    CHECK(back.profile_based[i].text == bank.profile_based[i].text);
  }

  auto fails_at = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_bank(in);
    } catch (const ValidationError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  const std::string ok = "PCXX2017001|01012017.01|Risk2|movl.window > limit(movl)|t|\n";
  CHECK(fails_at("# only a comment\n", "empty"));
  CHECK(fails_at(ok + "PCXX2017002|01012017.01|Risk2|movl.window >= 1|t\n", "line 2"));
  CHECK(fails_at(ok + "PCXX2017002|01012017.02|Risk2|movl.window >= 1|t|\n", "version differs"));
  CHECK(fails_at(ok + ok, "duplicate"));
  CHECK(fails_at("PCXX2017001|01012017.01|Risk9|movl.window >= 1|t|\n", "unknown class"));
  CHECK(fails_at("PCXX2017001|01012017.01|Risk2|movl.window <= limit(movl)|t|\n", "line 1"));
  CHECK(fails_at("P1|01012017.01|Risk2|movl.window >= 1|t|\n", "bad rule id"));
}

TEST_CASE("bank registry picks up new versions and keeps handed out banks") {
  auto dir = scratch_dir("banks");
  {
    std::ofstream f(dir / "a.rules");
    write_bank(f, builtin_bank());
  }
  BankRegistry reg(dir);
  CHECK(reg.refresh());
  CHECK_FALSE(reg.refresh());
  auto first = reg.latest();
  CHECK(first->version.to_string() == "02032017.01");

  {
    std::ofstream f(dir / "b.rules");
    f << "BCXX2017001|05042017.01|*|movl.window >= 1000|x|y\n";
  }
  {
    std::ofstream f(dir / "broken.rules");
    f << "garbage\n";
  }
  {
    std::ofstream f(dir / "ignored.txt");
    f << "garbage\n";
  }
  CHECK(reg.refresh());
  CHECK(reg.latest()->version.to_string() == "05042017.01");
  CHECK(reg.versions().size() == 2);
  CHECK(reg.errors().size() == 1);
  // the first capture still holds its bank
  CHECK(first->size() == 25);
  CHECK(reg.get(*Version::parse("02032017.01")) == first);
  CHECK_THROWS_AS(reg.get(*Version::parse("01012000.01")), NotFoundError);

  std::filesystem::remove(dir / "b.rules");
  CHECK(reg.refresh());
  CHECK(reg.latest() == first);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(BankRegistry(dir).refresh(), IoError);
}

TEST_CASE("crafted profiles trigger the rule they were built for") {
  auto bank = builtin_bank();
  profiler::ClientProfile quiet;  // busy account gone silent
  quiet[Attribute::Movl] = {200, 25, 2};
  auto m = ids(evaluate_rules(quiet, ProfileClass::Standard, bank, 0.0));
  CHECK(m == std::set<std::string>{"BCXX2016003"});

  profiler::ClientProfile burst;  // monthly movements above the annual total
  burst[Attribute::Movl] = {20, 3, 25};
  burst[Attribute::Band1] = {20, 3, 25};
  m = ids(evaluate_rules(burst, ProfileClass::Standard, bank, 0.0));
  CHECK(m.count("PCXX2016001"));
  CHECK(m.count("BCXX2016005"));
  // the same window is ordinary for a Risk1 monthly max of 20
  burst[Attribute::Movl].monthly_max = 20;
  burst[Attribute::Band1].monthly_max = 20;
  CHECK(evaluate_rules(burst, ProfileClass::Risk1, bank, 0.0).empty());

  profiler::ClientProfile margin;  // only the margin makes it suspicious
  margin[Attribute::Movl] = {100, 10, 97};
  margin[Attribute::Band1] = {100, 10, 97};
  CHECK_FALSE(ids(evaluate_rules(margin, ProfileClass::Standard, bank, 0.0)).count("PCXX2016001"));
  CHECK(ids(evaluate_rules(margin, ProfileClass::Standard, bank, 5.0)).count("PCXX2016001"));
  auto details = evaluate_rules(margin, ProfileClass::Standard, bank, 5.0);
  CHECK(details.front().detail.find("97") != std::string::npos);
}

TEST_CASE("property: margins only add suspicions and never touch Risk1") {
  auto bank = builtin_bank();
  std::mt19937_64 rng(43);
  const double mars[] = {0, 1, 5, 10, 20, 50, 90};
  for (int i = 0; i < 3000; ++i) {
    auto p = random_profile(rng);
    for (auto c : kAllClasses) {
      auto base = ids(evaluate_rules(p, c, bank, std::nullopt));
      std::set<std::string> prev;
      for (double mar : mars) {
        auto cur = ids(evaluate_rules(p, c, bank, mar));
        if (mar == 0) CHECK(cur == base);
        CHECK(subset(prev, cur));
        if (c == ProfileClass::Risk1) CHECK(cur == base);
        prev = std::move(cur);
      }
    }
  }
}

TEST_CASE("capture over a learned population") {
  const auto& w = world();
  CaptureOptions opt{w.analysis_date, 5.0};
  auto r = capture(w.window, w.bank, w.models, opt);
  CHECK(r.analyzed == w.window.size());
  CHECK_FALSE(r.suspicions.empty());
  CHECK(std::is_sorted(r.suspicions.begin(), r.suspicions.end(),
                       [](const Suspicion& a, const Suspicion& b) { return a.key < b.key; }));

  // phase 1 moves profiles between classes, never creates or drops them
  std::size_t total = 0;
  for (const auto& [kind, counts] : r.phase1) {
    long long net = 0;
    std::size_t orig = 0, adj = 0;
    for (auto c : kAllClasses) {
      net += counts.delta(c);
      if (promoted(c))
        CHECK(counts.delta(c) >= 0);
      else
        CHECK(counts.delta(c) <= 0);
      orig += counts.original[static_cast<std::size_t>(c)];
      adj += counts.adjusted[static_cast<std::size_t>(c)];
    }
    CHECK(net == 0);
    CHECK(orig == adj);
    total += orig;
  }
  CHECK(total == r.analyzed);

  for (const auto& s : r.suspicions) {
    CHECK_FALSE(s.triggered.empty());
    CHECK(s.mar == 5.0);
    CHECK(s.analysis_date == w.analysis_date);
    // reclassification only raises risk
    if (s.analysis_class != s.original_class) CHECK(promoted(s.analysis_class));
    for (const auto& m : s.triggered) CHECK(w.bank.find(m.rule_id)->applies_to(s.analysis_class));
    CHECK(ids(evaluate_rules(s.profile, s.analysis_class, w.bank, 5.0)) == ids(s.triggered));
  }
}

TEST_CASE("property: capture is monotone in the margin and MAR 0 equals the baseline") {
  const auto& w = world();
  auto keys = [](const CaptureResult& r) {
    std::set<std::string> out;
    for (const auto& s : r.suspicions) out.insert(s.id());
    return out;
  };
  auto base = capture(w.window, w.bank, w.models, {w.analysis_date, std::nullopt});
  auto zero = capture(w.window, w.bank, w.models, {w.analysis_date, 0.0});
  CHECK(keys(base) == keys(zero));
  CHECK(base.phase1 == zero.phase1);
  std::set<std::string> prev;
  std::set<std::string> risk1_base;
  for (const auto& s : base.suspicions)
    if (s.analysis_class == ProfileClass::Risk1) risk1_base.insert(s.id());
  for (double mar : {0.0, 5.0, 10.0, 20.0, 40.0}) {
    auto r = capture(w.window, w.bank, w.models, {w.analysis_date, mar});
    auto cur = keys(r);
    CHECK(subset(prev, cur));
    std::set<std::string> risk1;
    for (const auto& s : r.suspicions)
      if (s.analysis_class == ProfileClass::Risk1) risk1.insert(s.id());
    CHECK(risk1 == risk1_base);
    prev = std::move(cur);
  }
}

TEST_CASE("capture needs a model for every segment it meets") {
  const auto& w = world();
  auto partial = w.models;
  partial.segments.erase(ClientKind::LegalEntity);
  CHECK_THROWS_AS(capture(w.window, w.bank, partial, {w.analysis_date, 0.0}), NotFoundError);
}

TEST_CASE("original class follows the training assignment, reclassify never lowers risk") {
  const auto& w = world();
  const auto& m = w.models.segment(ClientKind::SingularPerson);
  for (const auto& p : w.window) {
    if (p.client_kind != ClientKind::SingularPerson) continue;
    auto o = original_class(p, m);
    auto a = reclassify(p, o, m);
    if (a != o) CHECK(promoted(a));
  }
}
