#include "support.hpp"

#include <sstream>

using namespace aml;
using namespace aml::test;

TEST_CASE("money parses exact cents") {
  CHECK(Money::parse("123")->cents() == 12300);
  CHECK(Money::parse("123.4")->cents() == 12340);
  CHECK(Money::parse("0.07")->cents() == 7);
  CHECK_FALSE(Money::parse("-1"));
  CHECK_FALSE(Money::parse("1e3"));
  CHECK_FALSE(Money::parse("1.234"));
  CHECK_FALSE(Money::parse(""));
  CHECK(Money::from_cents(99999).to_string() == "999.99");
  CHECK(Money::from_cents(5).to_string() == "0.05");
}

TEST_CASE("money round trip over random cents") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    auto c = static_cast<std::int64_t>(rng() % 10000000000ULL);
    auto m = Money::from_cents(c);
    REQUIRE(Money::parse(m.to_string()));
    CHECK(Money::parse(m.to_string())->cents() == c);
  }
}

TEST_CASE("calendar helpers") {
  CHECK(format_date(ymd(2016, 12, 1)) == "2016-12-01");
  CHECK(parse_date("2016-02-30") == std::nullopt);
  CHECK(*parse_date("2016-02-29") == ymd(2016, 2, 29));
  CHECK(add_months_clamped(ymd(2016, 3, 31), -1) == ymd(2016, 2, 29));
  CHECK(add_months_clamped(ymd(2016, 12, 1), -1) == ymd(2016, 11, 1));
  CHECK(add_months_clamped(ymd(2016, 1, 31), 13) == ymd(2017, 2, 28));
  CHECK(months_between(ym(2015, 1), ym(2016, 12)) == 23);
  CHECK(whole_years_between(ymd(2000, 6, 1), ymd(2016, 5, 31)) == 15);
  CHECK(whole_years_between(ymd(2000, 6, 1), ymd(2016, 6, 1)) == 16);
  auto t = parse_timestamp("2016-11-30T23:59:59");
  REQUIRE(t);
  CHECK(date_of(*t) == ymd(2016, 11, 30));
  CHECK(format_timestamp(*t) == "2016-11-30T23:59:59");
}

TEST_CASE("versions order by date then sequence") {
  auto a = Version::parse("02032017.01");
  auto b = Version::parse("02032017.02");
  auto c = Version::parse("01012018.01");
  REQUIRE(a);
  REQUIRE(b);
  REQUIRE(c);
  CHECK(a->to_string() == "02032017.01");
  CHECK(*a < *b);
  CHECK(*b < *c);
  CHECK_FALSE(Version::parse("2017-03-02"));
  CHECK_FALSE(Version::parse("32012017.01"));
}

TEST_CASE("short decimal reads back") {
  CHECK(short_decimal(5) == "5");
  CHECK(short_decimal(12.5) == "12.5");
  CHECK(short_decimal(0.1) == "0.1");
  for (double v : {0.0, 1e-7, 3.14159, 99.99, 1e12})
    CHECK(*parse_double(short_decimal(v)) == v);
}

TEST_CASE("product comes from the account prefix") {
  CHECK(product_of({"C1", "0001", "CC-0001"}) == "CC");
  CHECK(product_of({"C1", "0001", "POUP-0001"}) == "POUP");
  CHECK(product_of({"C1", "0001", "123456"}) == "CC");
}

TEST_CASE("transaction lines round trip") {
  auto k = akey("C0000042");
  std::ostringstream os;
  os << ingest::transaction_header() << "\n";
  std::vector<ingest::Transaction> txs = {
      tx(k, ymd(2016, 1, 5), 1500.25, ingest::Direction::Debit, ingest::Destination::OtherBankTED, 201),
      tx(k, ymd(2016, 1, 6), 0.01, ingest::Direction::Credit, ingest::Destination::None, 7),
      tx(k, ymd(2016, 1, 7), 12, ingest::Direction::Debit, ingest::Destination::SameBank, 9,
         ingest::TxKind::Fee)};
  for (const auto& t : txs) os << ingest::format_transaction(t) << "\n";
  std::istringstream is(os.str());
  auto r = ingest::parse_transactions(is);
  CHECK(r.errors.empty());
  CHECK(r.records == txs);
}

TEST_CASE("malformed lines are reported, the batch goes on") {
  std::istringstream is(ingest::transaction_header() +
                        "\n"
                        "C1;0001;CC-1;2016-01-05T10:00:00;10.00;D;1;-;ORD\n"
                        "C1;0001;CC-1;2016-01-05T10:00:00;-10.00;D;1;-;ORD\n"
                        "C1;0001;CC-1;not-a-date;10.00;D;1;-;ORD\n"
                        "C1;0001;CC-1;2016-01-05T10:00:00;10.00;X;1;-;ORD\n"
                        "C1;0001;CC-1;2016-01-05T10:00:00;10.00;D;1;-\n"
                        "C1;0001;CC-1;2016-01-06T10:00:00;0;D;1;-;ORD\n"
                        "C1;0001;CC-1;2016-01-07T10:00:00;3.5;C;1;-;INT\n");
  auto r = ingest::parse_transactions(is);
  // a zero amount is a valid record
  CHECK(r.records.size() == 3);
  REQUIRE(r.errors.size() == 4);
  CHECK(r.errors[0].line == 3);
  CHECK(r.errors[3].line == 6);
}

TEST_CASE("schema mapping reorders columns") {
  auto schema = ingest::TransactionSchema::standard();
  schema.column_names[static_cast<std::size_t>(ingest::TxField::Amount)] = "valor";
  std::istringstream is(
      "valor;client_id;agency;account;timestamp;direction;service_code;destination;kind\n"
      "10.50;C1;0001;CC-1;2016-01-05T10:00:00;C;1;-;ORD\n");
  auto r = ingest::parse_transactions(is, schema);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].amount.cents() == 1050);
  std::istringstream bad("a;b;c\n");
  CHECK_THROWS_AS(ingest::parse_transactions(bad), ConfigError);
}

TEST_CASE("relevance filter keeps ordinary movements in order") {
  auto k = akey("C1");
  std::vector<ingest::Transaction> txs;
  const ingest::TxKind kinds[] = {ingest::TxKind::Ordinary, ingest::TxKind::Fee, ingest::TxKind::Commission,
                                  ingest::TxKind::Interest, ingest::TxKind::Tax, ingest::TxKind::Ordinary};
  int day = 1;
  for (auto kind : kinds)
    txs.push_back(tx(k, ymd(2016, 1, day++), 10, ingest::Direction::Debit, ingest::Destination::None, 1, kind));
  auto kept = ingest::filter_relevant(txs);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == txs[0]);
  CHECK(kept[1] == txs[5]);
}

TEST_CASE("segmentation partitions by client kind and reports unknown clients") {
  auto reg = ingest::make_registry({{"A", ClientKind::SingularPerson, ymd(2000, 1, 1)},
                                    {"B", ClientKind::LegalEntity, ymd(2010, 1, 1)}});
  std::vector<ingest::Transaction> txs = {tx(akey("A"), ymd(2016, 1, 1), 1), tx(akey("B"), ymd(2016, 1, 1), 2),
                                          tx(akey("Z"), ymd(2016, 1, 1), 3), tx(akey("A"), ymd(2016, 1, 2), 4)};
  auto s = ingest::segment_clients(txs, reg);
  CHECK(s.singular.size() == 2);
  CHECK(s.entity.size() == 1);
  REQUIRE(s.unknown.size() == 1);
  CHECK(s.unknown[0].index == 2);
  CHECK(s.unknown[0].client_id == "Z");
  CHECK(s.singular.size() + s.entity.size() + s.unknown.size() == txs.size());
}

TEST_CASE("gzip files read back transparently") {
  auto dir = scratch_dir("gz");
  std::string text = ingest::client_header() + "\nC1;PF;2001-02-03\nC2;PJ;2010-10-10\n";
  ingest::write_text_file(dir / "clients.csv.gz", text, true);
  ingest::write_text_file(dir / "plain.csv", text, false);
  CHECK(ingest::read_text_file(dir / "clients.csv.gz") == text);
  CHECK(ingest::read_text_file(dir / "plain.csv") == text);
  auto c = ingest::load_clients(dir / "clients.csv.gz");
  REQUIRE(c.records.size() == 2);
  CHECK(c.records[1].kind == ClientKind::LegalEntity);
  CHECK_THROWS_AS(ingest::read_text_file(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
