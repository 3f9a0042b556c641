#include "aml/profiler.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>

namespace aml::profiler {

namespace {

constexpr std::array<std::string_view, kAttributeCount> kDisplay = {
    "Serv", "Movl", "Fxlvr1", "Fxlvr2", "Fxlvr3", "Fxlvr4",
    "Fxlvr5", "Fxlvr6", "PctDEB", "PctTED", "PctDOC"};
constexpr std::array<std::string_view, kAttributeCount> kRuleNames = {
    "serv", "movl", "fxlvr1", "fxlvr2", "fxlvr3", "fxlvr4",
    "fxlvr5", "fxlvr6", "pctdeb", "pctted", "pctdoc"};

double percent(std::int64_t num, std::int64_t den, double ceiling) {
  if (den == 0) return num == 0 ? 0.0 : ceiling;
  return std::min(100.0 * static_cast<double>(num) / static_cast<double>(den), ceiling);
}

using AccumulatorMap = std::unordered_map<AccountKey, CycleAccumulator, AccountKeyHash>;

ClientProfile make_profile(const AccountKey& key, const ingest::Registry* registry, Date as_of) {
  ClientProfile p;
  p.key = key;
  if (registry) {
    if (auto it = registry->find(key.client_id); it != registry->end()) {
      p.client_kind = it->second.kind;
      p.account_age_years = whole_years_between(it->second.account_opened, as_of);
    }
  }
  return p;
}

}  // namespace

std::string_view display_name(Attribute a) { return kDisplay[static_cast<std::size_t>(a)]; }
std::string_view rule_name(Attribute a) { return kRuleNames[static_cast<std::size_t>(a)]; }

std::optional<Attribute> parse_rule_name(std::string_view s) {
  for (std::size_t i = 0; i < kAttributeCount; ++i)
    if (kRuleNames[i] == s) return static_cast<Attribute>(i);
  return std::nullopt;
}

BandSchema BandSchema::standard() {
  return BandSchema{{Money::units(1'000), Money::units(5'000), Money::units(10'000),
                     Money::units(50'000), Money::units(100'000)}};
}

void BandSchema::validate() const {
  if (thresholds[0] <= Money{}) throw ConfigError("band thresholds must be positive");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i - 1] < thresholds[i]))
      throw ConfigError("band thresholds must be strictly increasing");
}

int value_band(Money amount, const BandSchema& schema) {
  if (amount <= Money{}) throw DomainError("value_band: amount must be positive");
  auto it = std::upper_bound(schema.thresholds.begin(), schema.thresholds.end(), amount);
  return static_cast<int>(it - schema.thresholds.begin()) + 1;
}

double pct_debit_month(std::span<const ingest::Transaction> month_txs, double ceiling) {
  std::int64_t deb = 0, cred = 0;
  for (const auto& tx : month_txs) {
    if (!(tx.key == month_txs.front().key))
      throw DomainError("pct_debit_month: transactions span several accounts");
    (tx.direction == ingest::Direction::Debit ? deb : cred) += tx.amount.cents();
  }
  return percent(deb, cred, ceiling);
}

int Cycle::month_index(Timestamp t) const {
  auto d = date_of(t);
  int idx = months_between(first, d.year() / d.month());
  return (idx >= 0 && idx < 12) ? idx : -1;
}

Date Cycle::end_date() const {
  auto l = last();
  return Date{std::chrono::year_month_day_last{l.year(), std::chrono::month_day_last{l.month()}}};
}

void PeriodAggregate::add(const ingest::Transaction& tx, const BandSchema& schema) {
  // zero-value records move nothing and have no band
  if (tx.amount <= Money{}) return;
  auto pos = std::lower_bound(services.begin(), services.end(), tx.service_code);
  if (pos == services.end() || *pos != tx.service_code) services.insert(pos, tx.service_code);
  ++movements;
  ++bands[static_cast<std::size_t>(value_band(tx.amount, schema) - 1)];
  if (tx.direction == ingest::Direction::Credit) {
    credit_cents += tx.amount.cents();
  } else {
    debit_cents += tx.amount.cents();
    if (tx.destination == ingest::Destination::OtherBankTED) ted_cents += tx.amount.cents();
    if (tx.destination == ingest::Destination::OtherBankDOC ||
        tx.destination == ingest::Destination::SameBank)
      doc_cents += tx.amount.cents();
  }
}

void PeriodAggregate::merge(const PeriodAggregate& o) {
  std::vector<std::uint16_t> merged;
  merged.reserve(services.size() + o.services.size());
  std::set_union(services.begin(), services.end(), o.services.begin(), o.services.end(),
                 std::back_inserter(merged));
  services = std::move(merged);
  movements += o.movements;
  for (std::size_t b = 0; b < kBandCount; ++b) bands[b] += o.bands[b];
  debit_cents += o.debit_cents;
  credit_cents += o.credit_cents;
  ted_cents += o.ted_cents;
  doc_cents += o.doc_cents;
}

std::array<double, kAttributeCount> PeriodAggregate::values(double ceiling) const {
  std::array<double, kAttributeCount> v{};
  v[static_cast<std::size_t>(Attribute::Serv)] = static_cast<double>(services.size());
  v[static_cast<std::size_t>(Attribute::Movl)] = static_cast<double>(movements);
  for (std::size_t b = 0; b < kBandCount; ++b)
    v[static_cast<std::size_t>(Attribute::Band1) + b] = static_cast<double>(bands[b]);
  v[static_cast<std::size_t>(Attribute::PctDeb)] = percent(debit_cents, credit_cents, ceiling);
  // transfer shares are bounded by the debited value, so never need the ceiling
  v[static_cast<std::size_t>(Attribute::PctTed)] = percent(ted_cents, debit_cents, 100.0);
  v[static_cast<std::size_t>(Attribute::PctDoc)] = percent(doc_cents, debit_cents, 100.0);
  return v;
}

void CycleAccumulator::merge(const CycleAccumulator& other) {
  for (std::size_t m = 0; m < 12; ++m) months[m].merge(other.months[m]);
}

std::array<AttributeTriple, kAttributeCount> CycleAccumulator::finalize(double ceiling) const {
  std::array<AttributeTriple, kAttributeCount> out{};
  std::int64_t deb = 0, cred = 0, ted = 0, doc = 0;
  for (const auto& month : months) {
    auto v = month.values(ceiling);
    for (std::size_t a = 0; a < kAttributeCount; ++a) {
      out[a].monthly_max = std::max(out[a].monthly_max, v[a]);
      if (!is_percent(static_cast<Attribute>(a))) out[a].annual_total += v[a];
    }
    deb += month.debit_cents;
    cred += month.credit_cents;
    ted += month.ted_cents;
    doc += month.doc_cents;
  }
  out[static_cast<std::size_t>(Attribute::PctDeb)].annual_total = percent(deb, cred, ceiling);
  out[static_cast<std::size_t>(Attribute::PctTed)].annual_total = percent(ted, deb, 100.0);
  out[static_cast<std::size_t>(Attribute::PctDoc)].annual_total = percent(doc, deb, 100.0);
  return out;
}

ProfileBuild build_profiles(std::span<const ingest::Transaction> txs, const Cycle& cycle,
                            const ProfileOptions& options, const ingest::Registry* registry) {
  options.bands.validate();
  ProfileBuild result;
  AccumulatorMap acc;
  for (const auto& tx : txs) {
    int m = cycle.month_index(tx.timestamp);
    if (m < 0) {
      ++result.outside_cycle;
      continue;
    }
    acc[tx.key].months[static_cast<std::size_t>(m)].add(tx, options.bands);
  }
  const Date as_of = cycle.end_date();
  for (auto& [key, a] : acc) {
    if (std::all_of(a.months.begin(), a.months.end(),
                    [](const PeriodAggregate& m) { return m.movements == 0; }))
      continue;
    auto p = make_profile(key, registry, as_of);
    p.attrs = a.finalize(options.percent_ceiling);
    result.profiles.emplace(key, std::move(p));
  }
  return result;
}

WindowSpan lookback_window(Date analysis_date) {
  return {add_months_clamped(analysis_date, -1), analysis_date};
}

ProfileMap window_profile(std::span<const ingest::Transaction> txs, Date analysis_date,
                          const ProfileOptions& options, const ingest::Registry* registry) {
  options.bands.validate();
  const auto window = lookback_window(analysis_date);
  const Timestamp begin = start_of(window.begin), end = start_of(window.end);
  std::unordered_map<AccountKey, PeriodAggregate, AccountKeyHash> acc;
  for (const auto& tx : txs)
    if (tx.timestamp >= begin && tx.timestamp < end) acc[tx.key].add(tx, options.bands);

  ProfileMap out;
  for (auto& [key, a] : acc) {
    if (a.movements == 0) continue;
    auto p = make_profile(key, registry, analysis_date);
    auto v = a.values(options.percent_ceiling);
    for (std::size_t i = 0; i < kAttributeCount; ++i) p.attrs[i].window_value = v[i];
    out.emplace(key, std::move(p));
  }
  return out;
}

JoinedProfiles attach_window(const ProfileMap& base, const ProfileMap& window) {
  JoinedProfiles out;
  for (const auto& [key, w] : window) {
    auto it = base.find(key);
    if (it == base.end()) {
      out.unprofiled.push_back(key);
      continue;
    }
    ClientProfile p = it->second;
    for (std::size_t i = 0; i < kAttributeCount; ++i)
      p.attrs[i].window_value = w.attrs[i].window_value;
    out.profiles.push_back(std::move(p));
  }
  return out;
}

std::vector<ClientProfile> activity_filter(std::vector<ClientProfile> profiles,
                                           long long min_movements) {
  std::erase_if(profiles, [&](const ClientProfile& p) {
    return p[Attribute::Movl].window_value < static_cast<double>(min_movements);
  });
  return profiles;
}

std::string profile_store_header() {
  std::string h = "client_id;agency;account;kind;age_years";
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    auto n = std::string(rule_name(static_cast<Attribute>(a)));
    h += ";" + n + "_total;" + n + "_max;" + n + "_window";
  }
  return h;
}

void write_profile_store(std::ostream& out, const ProfileMap& profiles) {
  out << profile_store_header() << '\n';
  for (const auto& [key, p] : profiles) {
    out << key.client_id << ';' << key.agency << ';' << key.account << ';'
        << (p.client_kind == ClientKind::SingularPerson ? "PF" : "PJ") << ';'
        << p.account_age_years;
    for (const auto& t : p.attrs)
      out << ';' << format_double(t.annual_total) << ';' << format_double(t.monthly_max) << ';'
          << format_double(t.window_value);
    out << '\n';
  }
}

ProfileMap read_profile_store(std::istream& in) {
  ProfileMap out;
  std::string line;
  if (!std::getline(in, line) || trim(line) != profile_store_header())
    throw ValidationError("profile store: unexpected header");
  std::size_t lineno = 1;
  constexpr std::size_t kCols = 5 + 3 * kAttributeCount;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split(trim(line), ';');
    auto bad = [&] { return ValidationError("profile store: bad record at line " + std::to_string(lineno)); };
    if (cols.size() != kCols) throw bad();
    ClientProfile p;
    p.key = {std::string(cols[0]), std::string(cols[1]), std::string(cols[2])};
    if (cols[3] == "PF")
      p.client_kind = ClientKind::SingularPerson;
    else if (cols[3] == "PJ")
      p.client_kind = ClientKind::LegalEntity;
    else
      throw bad();
    auto age = parse_int(cols[4]);
    if (!age) throw bad();
    p.account_age_years = static_cast<int>(*age);
    for (std::size_t a = 0; a < kAttributeCount; ++a) {
      auto t = parse_double(cols[5 + 3 * a]), m = parse_double(cols[6 + 3 * a]),
           w = parse_double(cols[7 + 3 * a]);
      if (!t || !m || !w) throw bad();
      p.attrs[a] = {*t, *m, *w};
    }
    auto key = p.key;
    out.emplace(std::move(key), std::move(p));
  }
  return out;
}

}  // namespace aml::profiler
