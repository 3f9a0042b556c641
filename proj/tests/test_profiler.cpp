#include "support.hpp"

#include <numeric>
#include <sstream>

using namespace aml;
using namespace aml::test;
using profiler::Attribute;
using ingest::Destination;
using ingest::Direction;

namespace {

const profiler::Cycle k2016{ym(2016, 1)};

double band_sum(const profiler::ClientProfile& p, double profiler::AttributeTriple::*field) {
  double s = 0;
  for (int b = 1; b <= 6; ++b) s += p[profiler::band_attribute(b)].*field;
  return s;
}

std::vector<ingest::Transaction> random_txs(std::mt19937_64& rng, int n, int accounts) {
  std::vector<ingest::Transaction> out;
  std::lognormal_distribution<double> amount(6.5, 2.0);
  for (int i = 0; i < n; ++i) {
    auto k = akey("C" + std::to_string(rng() % accounts));
    Date d = ymd(2016, 1 + static_cast<unsigned>(rng() % 12), 1 + static_cast<unsigned>(rng() % 28));
    double a = std::max(0.01, std::round(amount(rng) * 100) / 100);
    auto dir = rng() % 2 ? Direction::Debit : Direction::Credit;
    auto dest = dir == Direction::Credit ? Destination::None : static_cast<Destination>(rng() % 4);
    out.push_back(tx(k, d, a, dir, dest, static_cast<std::uint16_t>(rng() % 6)));
  }
  return out;
}

}  // namespace

TEST_CASE("value bands are half open") {
  auto s = profiler::BandSchema::standard();
  CHECK(profiler::value_band(Money::from_cents(1), s) == 1);
  CHECK(profiler::value_band(Money::from_cents(99999), s) == 1);
  CHECK(profiler::value_band(Money::units(1000), s) == 2);
  CHECK(profiler::value_band(Money::units(5000), s) == 3);
  CHECK(profiler::value_band(Money::units(10000), s) == 4);
  CHECK(profiler::value_band(Money::units(50000), s) == 5);
  CHECK(profiler::value_band(Money::from_cents(9999999), s) == 5);
  CHECK(profiler::value_band(Money::units(100000), s) == 6);
  CHECK_THROWS_AS(profiler::value_band(Money{}, s), DomainError);
  profiler::BandSchema bad = s;
  bad.thresholds[2] = bad.thresholds[1];
  CHECK_THROWS(bad.validate());
}

TEST_CASE("monthly debit percentage edge cases") {
  auto k = akey("C1");
  CHECK(profiler::pct_debit_month({}) == 0.0);
  std::vector<ingest::Transaction> only_debits = {tx(k, ymd(2016, 1, 1), 10)};
  CHECK(profiler::pct_debit_month(only_debits) == doctest::Approx(999.99));
  std::vector<ingest::Transaction> both = {tx(k, ymd(2016, 1, 1), 30), tx(k, ymd(2016, 1, 2), 40, Direction::Credit)};
  CHECK(profiler::pct_debit_month(both) == doctest::Approx(75.0));
  std::vector<ingest::Transaction> mixed = {tx(k, ymd(2016, 1, 1), 10), tx(akey("C2"), ymd(2016, 1, 1), 10)};
  CHECK_THROWS_AS(profiler::pct_debit_month(mixed), DomainError);
}

TEST_CASE("hand aggregated profile") {
  auto k = akey("C1");
  std::vector<ingest::Transaction> txs = {
      tx(k, ymd(2016, 1, 5), 500, Direction::Debit, Destination::OtherBankTED, 1),
      tx(k, ymd(2016, 1, 6), 2000, Direction::Credit, Destination::None, 2),
      tx(k, ymd(2016, 1, 7), 1000, Direction::Debit, Destination::OtherBankDOC, 1),
      tx(k, ymd(2016, 3, 10), 100000, Direction::Debit, Destination::SameBank, 3),
      tx(k, ymd(2016, 3, 11), 99999.99, Direction::Credit, Destination::None, 100),
      tx(k, ymd(2015, 12, 31), 10),
      tx(k, ymd(2016, 5, 1), 0),
  };
  auto reg = ingest::make_registry({{"C1", ClientKind::LegalEntity, ymd(2001, 6, 1)}});
  auto build = profiler::build_profiles(txs, k2016, {}, &reg);
  CHECK(build.outside_cycle == 1);
  REQUIRE(build.profiles.size() == 1);
  const auto& p = build.profiles.at(k);
  CHECK(p.client_kind == ClientKind::LegalEntity);
  CHECK(p.account_age_years == 15);

  CHECK(p[Attribute::Movl].annual_total == 5);
  CHECK(p[Attribute::Movl].monthly_max == 3);
  CHECK(p[Attribute::Serv].annual_total == 4);
  CHECK(p[Attribute::Serv].monthly_max == 2);
  CHECK(p[Attribute::Band1].annual_total == 1);
  CHECK(p[Attribute::Band2].annual_total == 2);
  CHECK(p[Attribute::Band2].monthly_max == 2);
  CHECK(p[Attribute::Band3].annual_total == 0);
  CHECK(p[Attribute::Band5].annual_total == 1);
  CHECK(p[Attribute::Band6].annual_total == 1);

  CHECK(p[Attribute::PctDeb].annual_total == doctest::Approx(100.0 * 101500 / 101999.99));
  CHECK(p[Attribute::PctDeb].monthly_max == doctest::Approx(100.0 * 100000 / 99999.99));
  CHECK(p[Attribute::PctTed].annual_total == doctest::Approx(100.0 * 500 / 101500));
  CHECK(p[Attribute::PctTed].monthly_max == doctest::Approx(100.0 / 3));
  // DOC and same-bank transfers share one class
  CHECK(p[Attribute::PctDoc].annual_total == doctest::Approx(100.0 * 101000 / 101500));
  CHECK(p[Attribute::PctDoc].monthly_max == doctest::Approx(100.0));
  for (const auto& t : p.attrs) CHECK(t.window_value == 0);

  auto w = profiler::window_profile(txs, ymd(2016, 4, 1), {}, &reg);
  REQUIRE(w.size() == 1);
  CHECK(w.at(k)[Attribute::Movl].window_value == 2);
  CHECK(w.at(k)[Attribute::Band6].window_value == 1);
  auto joined = profiler::attach_window(build.profiles, w);
  REQUIRE(joined.profiles.size() == 1);
  CHECK(joined.profiles[0][Attribute::Movl].annual_total == 5);
  CHECK(joined.profiles[0][Attribute::Movl].window_value == 2);

  // nothing in the February window
  CHECK(profiler::window_profile(txs, ymd(2016, 3, 1), {}, &reg).empty());
}

TEST_CASE("window is the month before the analysis date") {
  auto w = profiler::lookback_window(ymd(2016, 12, 1));
  CHECK(w.begin == ymd(2016, 11, 1));
  CHECK(w.end == ymd(2016, 12, 1));
  auto k = akey("C1");
  std::vector<ingest::Transaction> txs = {tx(k, ymd(2016, 10, 31), 1), tx(k, ymd(2016, 11, 1), 1),
                                          tx(k, ymd(2016, 11, 30), 1), tx(k, ymd(2016, 12, 1), 1)};
  auto p = profiler::window_profile(txs, ymd(2016, 12, 1));
  CHECK(p.at(k)[Attribute::Movl].window_value == 2);
}

TEST_CASE("unprofiled window accounts are listed apart") {
  auto a = akey("A"), b = akey("B");
  std::vector<ingest::Transaction> base_txs = {tx(a, ymd(2016, 1, 1), 5)};
  std::vector<ingest::Transaction> window_txs = {tx(a, ymd(2016, 11, 2), 5), tx(b, ymd(2016, 11, 3), 5)};
  auto base = profiler::build_profiles(base_txs, k2016).profiles;
  auto j = profiler::attach_window(base, profiler::window_profile(window_txs, ymd(2016, 12, 1)));
  CHECK(j.profiles.size() == 1);
  REQUIRE(j.unprofiled.size() == 1);
  CHECK(j.unprofiled[0] == b);
}

TEST_CASE("property: band counts sum to movements") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    auto txs = random_txs(rng, 400, 15);
    for (const auto& [k, p] : profiler::build_profiles(txs, k2016).profiles) {
      CHECK(band_sum(p, &profiler::AttributeTriple::annual_total) == p[Attribute::Movl].annual_total);
      CHECK(p[Attribute::Movl].monthly_max <= p[Attribute::Movl].annual_total);
      CHECK(p[Attribute::PctTed].annual_total <= 100.0);
    }
    for (const auto& [k, p] : profiler::window_profile(txs, ymd(2016, 7, 1)))
      CHECK(band_sum(p, &profiler::AttributeTriple::window_value) == p[Attribute::Movl].window_value);
  }
}

TEST_CASE("property: accumulators merge in any sharding") {
  std::mt19937_64 rng(12);
  auto txs = random_txs(rng, 600, 1);
  auto schema = profiler::BandSchema::standard();
  profiler::CycleAccumulator whole, left, right;
  for (const auto& t : txs) {
    int m = k2016.month_index(t.timestamp);
    REQUIRE(m >= 0);
    whole.months[m].add(t, schema);
    (rng() % 2 ? left : right).months[m].add(t, schema);
  }
  left.merge(right);
  auto a = whole.finalize(999.99), b = left.finalize(999.99);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].annual_total == doctest::Approx(b[i].annual_total));
    CHECK(a[i].monthly_max == doctest::Approx(b[i].monthly_max));
  }
}

TEST_CASE("profile store round trip") {
  std::mt19937_64 rng(13);
  auto txs = random_txs(rng, 300, 10);
  auto profiles = profiler::build_profiles(txs, k2016).profiles;
  std::ostringstream os;
  profiler::write_profile_store(os, profiles);
  std::istringstream is(os.str());
  auto back = profiler::read_profile_store(is);
  REQUIRE(back.size() == profiles.size());
  for (const auto& [k, p] : profiles) {
    const auto& q = back.at(k);
    CHECK(q.client_kind == p.client_kind);
    for (std::size_t i = 0; i < p.attrs.size(); ++i) {
      CHECK(q.attrs[i].annual_total == doctest::Approx(p.attrs[i].annual_total));
      CHECK(q.attrs[i].monthly_max == doctest::Approx(p.attrs[i].monthly_max));
    }
  }
}
