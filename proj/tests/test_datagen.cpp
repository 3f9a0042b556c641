#include "world.hpp"

using namespace aml;
using namespace aml::test;
using namespace aml::datagen;
using profiler::Attribute;

namespace {

GeneratorConfig tiny(std::uint64_t seed = 5) {
  auto c = GeneratorConfig::defaults();
  c.clients = 300;
  c.seed = seed;
  for (auto& [s, n] : c.scenarios) n = 1;
  return c;
}

}  // namespace

TEST_CASE("same config, same dataset") {
  auto a = generate(tiny());
  auto b = generate(tiny());
  CHECK(a.clients == b.clients);
  CHECK(a.transactions == b.transactions);
  CHECK(a.truth == b.truth);
  auto c = generate(tiny(6));
  CHECK_FALSE(c.transactions == a.transactions);
}

TEST_CASE("dataset shape") {
  auto cfg = tiny();
  auto d = generate(cfg);
  CHECK(d.clients.size() == 300);
  CHECK(d.truth.size() == 4);
  std::size_t entities = 0;
  for (const auto& c : d.clients) entities += c.kind == ClientKind::LegalEntity;
  CHECK(entities == doctest::Approx(300 * cfg.entity_share).epsilon(0.5));
  auto first = start_of(Date{cfg.first_cycle / std::chrono::day{1}});
  auto end = start_of(cfg.cycle(2).end_date()) + std::chrono::days{1};
  for (const auto& t : d.transactions) {
    CHECK(t.timestamp >= first);
    CHECK(t.timestamp < end);
  }
  for (const auto& [k, s] : d.truth) {
    CHECK(product_of(k) == "CC");
    CHECK(d.planted.at(k).first == ClientKind::SingularPerson);
  }
}

TEST_CASE("planted accounts stand out in the analysis window") {
  const auto& w = world();
  std::map<AccountKey, const profiler::ClientProfile*> by_key;
  for (const auto& p : w.window) by_key[p.key] = &p;
  for (const auto& [k, s] : w.data.truth) {
    CAPTURE(k.account);
    CAPTURE(to_string(s));
    auto it = by_key.find(k);
    if (s == Scenario::DropOff) {
      if (it != by_key.end()) CHECK((*it->second)[Attribute::Movl].window_value <= 0.1 * (*it->second)[Attribute::Movl].monthly_max);
      continue;
    }
    REQUIRE(it != by_key.end());
    const auto& p = *it->second;
    if (s == Scenario::Smurfing) CHECK(p[Attribute::Band5].window_value >= 3);
    if (s == Scenario::DormantBurst) CHECK(p[Attribute::Movl].window_value >= 10);
    if (s == Scenario::PassThrough) CHECK(p[Attribute::PctTed].window_value >= 95);
  }
}

TEST_CASE("emit and load back, plain and gzip") {
  auto d = generate(tiny());
  for (bool gz : {false, true}) {
    auto dir = scratch_dir(gz ? "emit-gz" : "emit");
    emit(d, dir, {gz});
    auto in = service::load_input(dir);
    CHECK(in.problems.empty());
    CHECK(in.clients == d.clients);
    CHECK(in.transactions == d.transactions);
    auto truth = parse_truth(ingest::read_text_file(dir / (gz ? "truth.csv.gz" : "truth.csv")));
    CHECK(truth == d.truth);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("config text round trip and errors") {
  auto c = tiny(99);
  c.singular[Archetype::Risk2].rate = 17.5;
  auto back = GeneratorConfig::parse(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.seed == 99);
  CHECK(back.singular[Archetype::Risk2].rate == 17.5);
  CHECK_THROWS_AS(GeneratorConfig::parse("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(GeneratorConfig::parse("clients = many\n"), ConfigError);
  auto bad = tiny();
  bad.clients = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto greedy = tiny();
  greedy.scenarios[Scenario::Smurfing] = 100000;
  CHECK_THROWS_AS(generate(greedy), ConfigError);
}

TEST_CASE("truth file errors") {
  CHECK_THROWS_AS(parse_truth("x;y\n"), ValidationError);
  CHECK_THROWS_AS(parse_truth(truth_header() + "\nC1;0001;CC-1;Laundering\n"), ValidationError);
  CHECK(parse_truth(truth_header() + "\nC1;0001;CC-1;smurfing\n").size() == 1);
}
