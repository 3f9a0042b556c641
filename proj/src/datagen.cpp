#include "aml/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace aml::datagen {

using namespace std::chrono;
using ingest::Destination;
using ingest::Direction;
using ingest::Transaction;
using ingest::TxKind;

namespace {

constexpr std::pair<Scenario, std::string_view> kScenarioNames[] = {
    {Scenario::None, "none"},
    {Scenario::Smurfing, "smurfing"},
    {Scenario::PassThrough, "pass_through"},
    {Scenario::DormantBurst, "dormant_burst"},
    {Scenario::DropOff, "drop_off"},
};

constexpr std::pair<Archetype, std::string_view> kArchetypeNames[] = {
    {Archetype::LowUsage, "low_usage"}, {Archetype::Standard, "standard"},
    {Archetype::Risk1, "risk1"},        {Archetype::Risk2, "risk2"},
    {Archetype::Risk3, "risk3"},
};

std::optional<Archetype> parse_archetype(std::string_view s) {
  for (auto [a, n] : kArchetypeNames)
    if (n == s) return a;
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Scenario s) {
  for (auto [v, n] : kScenarioNames)
    if (v == s) return n;
  return "?";
}

std::optional<Scenario> parse_scenario(std::string_view s) {
  for (auto [v, n] : kScenarioNames)
    if (n == s) return v;
  return std::nullopt;
}

std::string_view to_string(Archetype a) {
  for (auto [v, n] : kArchetypeNames)
    if (v == a) return n;
  return "?";
}

// ---------------------------------------------------------------------------
// configuration

std::map<Archetype, ArchetypeParams> default_archetypes(ClientKind kind) {
  std::map<Archetype, ArchetypeParams> s, e;
  s[Archetype::LowUsage] = {.share = 0.15, .rate = 0.4, .median = 150, .sigma = 0.8,
                            .credit_share = 0.5, .ted_share = 0.0, .doc_share = 0.05,
                            .same_bank_share = 0.1, .services = 2};
  s[Archetype::Standard] = {.share = 0.73, .rate = 2.5, .median = 300, .sigma = 0.9,
                            .credit_share = 0.2, .ted_share = 0.08, .doc_share = 0.05,
                            .same_bank_share = 0.15, .salary = 3000, .services = 4};
  s[Archetype::Risk1] = {.share = 0.06, .rate = 14, .median = 3500, .sigma = 1.0,
                         .credit_share = 0.45, .ted_share = 0.35, .doc_share = 0.1,
                         .same_bank_share = 0.15, .services = 6};
  s[Archetype::Risk2] = {.share = 0.035, .rate = 4, .median = 5000, .sigma = 1.0,
                         .near_limit = 0.85, .credit_share = 0.5, .ted_share = 0.0,
                         .doc_share = 0.4, .same_bank_share = 0.4, .services = 4};
  s[Archetype::Risk3] = {.share = 0.025, .rate = 3, .median = 120000, .sigma = 0.3,
                         .credit_share = 0.5, .ted_share = 0.8, .doc_share = 0.0,
                         .same_bank_share = 0.0, .services = 3};
  if (kind == ClientKind::SingularPerson) return s;
  e[Archetype::LowUsage] = {.share = 0.2, .rate = 1, .median = 3000, .sigma = 1.0,
                            .credit_share = 0.5, .ted_share = 0.1, .doc_share = 0.1,
                            .same_bank_share = 0.2, .services = 3};
  e[Archetype::Standard] = {.share = 0.6, .rate = 10, .median = 300000, .sigma = 1.0,
                            .credit_share = 0.5, .ted_share = 0.2, .doc_share = 0.1,
                            .same_bank_share = 0.3, .services = 8};
  e[Archetype::Risk1] = {.share = 0.0};
  e[Archetype::Risk2] = {.share = 0.12, .rate = 6, .median = 20000, .sigma = 1.0,
                         .near_limit = 0.85, .credit_share = 0.5, .ted_share = 0.0,
                         .doc_share = 0.4, .same_bank_share = 0.4, .services = 5};
  e[Archetype::Risk3] = {.share = 0.08, .rate = 6, .median = 1500000, .sigma = 0.4,
                         .credit_share = 0.5, .ted_share = 0.8, .doc_share = 0.0,
                         .same_bank_share = 0.0, .services = 4};
  return e;
}

GeneratorConfig GeneratorConfig::defaults() { return GeneratorConfig{}; }

namespace {

struct ParamField {
  std::string_view name;
  double ArchetypeParams::*field;
};
constexpr ParamField kParamFields[] = {
    {"share", &ArchetypeParams::share},
    {"rate", &ArchetypeParams::rate},
    {"median", &ArchetypeParams::median},
    {"sigma", &ArchetypeParams::sigma},
    {"near_limit", &ArchetypeParams::near_limit},
    {"near_low", &ArchetypeParams::near_low},
    {"near_high", &ArchetypeParams::near_high},
    {"credit_share", &ArchetypeParams::credit_share},
    {"ted_share", &ArchetypeParams::ted_share},
    {"doc_share", &ArchetypeParams::doc_share},
    {"same_bank_share", &ArchetypeParams::same_bank_share},
    {"salary", &ArchetypeParams::salary},
};

double need_double(std::string_view key, std::string_view v) {
  auto d = parse_double(v);
  if (!d) throw ConfigError("config: '" + std::string(key) + "' expects a number");
  return *d;
}

long long need_int(std::string_view key, std::string_view v) {
  auto d = parse_int(v);
  if (!d) throw ConfigError("config: '" + std::string(key) + "' expects an integer");
  return *d;
}

}  // namespace

GeneratorConfig GeneratorConfig::parse(std::string_view text) {
  GeneratorConfig c = defaults();
  std::size_t lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto val = trim(line.substr(eq + 1));
    if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(need_int(key, val));
    } else if (key == "clients") {
      c.clients = static_cast<int>(need_int(key, val));
    } else if (key == "entity_share") {
      c.entity_share = need_double(key, val);
    } else if (key == "second_account_share") {
      c.second_account_share = need_double(key, val);
    } else if (key == "fee_rate") {
      c.fee_rate = need_double(key, val);
    } else if (key == "first_cycle") {
      auto ym = parse_year_month(val);
      if (!ym) throw ConfigError("config: first_cycle expects YYYY-MM");
      c.first_cycle = *ym;
    } else if (key == "analysis_date") {
      auto d = parse_date(val);
      if (!d) throw ConfigError("config: analysis_date expects YYYY-MM-DD");
      c.analysis_date = *d;
    } else if (key == "bands") {
      auto parts = split(val, ',');
      if (parts.size() != c.bands.thresholds.size())
        throw ConfigError("config: bands expects 5 comma-separated amounts");
      for (std::size_t i = 0; i < parts.size(); ++i) {
        auto m = Money::parse(trim(parts[i]));
        if (!m) throw ConfigError("config: bad band threshold '" + std::string(parts[i]) + "'");
        c.bands.thresholds[i] = *m;
      }
    } else if (key.starts_with("scenario.")) {
      auto s = parse_scenario(key.substr(9));
      if (!s || *s == Scenario::None) throw ConfigError("config: unknown scenario in '" + std::string(key) + "'");
      c.scenarios[*s] = static_cast<int>(need_int(key, val));
    } else if (key.starts_with("singular.") || key.starts_with("entity.")) {
      auto parts = split(key, '.');
      if (parts.size() != 3) throw ConfigError("config: unknown key '" + std::string(key) + "'");
      auto a = parse_archetype(parts[1]);
      if (!a) throw ConfigError("config: unknown archetype in '" + std::string(key) + "'");
      auto& p = (parts[0] == "singular" ? c.singular : c.entity)[*a];
      if (parts[2] == "services") {
        p.services = static_cast<int>(need_int(key, val));
      } else {
        auto f = std::find_if(std::begin(kParamFields), std::end(kParamFields),
                              [&](const ParamField& pf) { return pf.name == parts[2]; });
        if (f == std::end(kParamFields)) throw ConfigError("config: unknown key '" + std::string(key) + "'");
        p.*(f->field) = need_double(key, val);
      }
    } else {
      throw ConfigError("config: unknown key '" + std::string(key) + "'");
    }
  }
  c.validate();
  return c;
}

GeneratorConfig GeneratorConfig::load(const std::filesystem::path& file) {
  return parse(ingest::read_text_file(file));
}

std::string GeneratorConfig::to_text() const {
  std::ostringstream os;
  os << "seed = " << seed << "\nclients = " << clients << "\nentity_share = "
     << format_double(entity_share) << "\nsecond_account_share = " << format_double(second_account_share)
     << "\nfee_rate = " << format_double(fee_rate) << "\nfirst_cycle = " << format_year_month(first_cycle)
     << "\nanalysis_date = " << format_date(analysis_date) << "\nbands = ";
  for (std::size_t i = 0; i < bands.thresholds.size(); ++i)
    os << (i ? "," : "") << bands.thresholds[i].to_string();
  os << '\n';
  for (auto [s, n] : scenarios) os << "scenario." << to_string(s) << " = " << n << '\n';
  for (const auto* seg : {&singular, &entity}) {
    const char* prefix = seg == &singular ? "singular." : "entity.";
    for (const auto& [a, p] : *seg) {
      for (const auto& f : kParamFields)
        os << prefix << to_string(a) << '.' << f.name << " = " << format_double(p.*(f.field)) << '\n';
      os << prefix << to_string(a) << ".services = " << p.services << '\n';
    }
  }
  return os.str();
}

profiler::Cycle GeneratorConfig::cycle(int n) const {
  return profiler::Cycle{first_cycle + months{12 * (n - 1)}};
}

void GeneratorConfig::validate() const {
  auto unit = [](double v, const std::string& what) {
    if (!(v >= 0 && v <= 1)) throw ConfigError(what + " must be in [0, 1]");
  };
  if (clients < 0) throw ConfigError("clients must be >= 0");
  unit(entity_share, "entity_share");
  unit(second_account_share, "second_account_share");
  if (!(fee_rate >= 0)) throw ConfigError("fee_rate must be >= 0");
  bands.validate();
  for (auto [s, n] : scenarios)
    if (n < 0) throw ConfigError("scenario counts must be >= 0");
  for (const auto* seg : {&singular, &entity}) {
    const std::string name = seg == &singular ? "singular" : "entity";
    double total = 0;
    for (const auto& [a, p] : *seg) {
      const std::string where = name + "." + std::string(to_string(a));
      unit(p.share, where + ".share");
      unit(p.near_limit, where + ".near_limit");
      unit(p.credit_share, where + ".credit_share");
      unit(p.ted_share + p.doc_share + p.same_bank_share, where + " destination shares");
      if (p.share > 0) {
        if (!(p.rate >= 0)) throw ConfigError(where + ".rate must be >= 0");
        if (!(p.median > 0)) throw ConfigError(where + ".median must be > 0");
        if (!(p.sigma >= 0)) throw ConfigError(where + ".sigma must be >= 0");
        if (!(p.near_low > 0 && p.near_low < p.near_high))
          throw ConfigError(where + " near_low/near_high must satisfy 0 < low < high");
        if (p.services < 1) throw ConfigError(where + ".services must be >= 1");
        if (p.salary < 0) throw ConfigError(where + ".salary must be >= 0");
      }
      total += p.share;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError(name + " archetype shares must sum to 1");
  }
  const auto window = profiler::lookback_window(analysis_date);
  const auto c2 = cycle(2);
  if (sys_days{window.begin} < sys_days{c2.first / day{1}} ||
      sys_days{window.end} > sys_days{c2.end_date()} + days{1})
    throw ConfigError("analysis window must lie inside the second cycle");
}

// ---------------------------------------------------------------------------
// generation

namespace {

/// splitmix64 step, used to derive independent per-account streams.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Money to_money(double units) {
  return Money::from_cents(std::max<long long>(1, std::llround(units * 100.0)));
}

struct Account {
  AccountKey key;
  ClientKind kind;
  Archetype archetype;
  const ArchetypeParams* params;
  Scenario scenario = Scenario::None;
};

class AccountGenerator {
 public:
  AccountGenerator(const GeneratorConfig& cfg, const Account& acct, std::uint64_t stream)
      : cfg_(cfg), acct_(acct), p_(*acct.params), rng_(mix(cfg.seed ^ mix(stream))) {
    std::lognormal_distribution<double> jitter(0.0, 0.3);
    median_ = p_.median * jitter(rng_);
    rate_ = p_.rate * std::lognormal_distribution<double>(0.0, 0.2)(rng_);
    salary_ = p_.salary > 0 ? p_.salary * std::lognormal_distribution<double>(0.0, 0.5)(rng_) : 0;
    std::uniform_int_distribution<int> code(100, 139);
    for (int i = 0; i < p_.services; ++i) pool_.push_back(static_cast<std::uint16_t>(code(rng_)));
  }

  void run(std::vector<Transaction>& out) {
    const auto start = out.size();
    for (int m = 0; m < 24; ++m) month(cfg_.first_cycle + months{m}, out);
    const auto window = profiler::lookback_window(cfg_.analysis_date);
    const Timestamp wb = start_of(window.begin);
    const Timestamp we = start_of(window.end);
    auto in_window = [&](const Transaction& t) {
      return t.kind == TxKind::Ordinary && t.timestamp >= wb && t.timestamp < we;
    };
    switch (acct_.scenario) {
      case Scenario::None: break;
      case Scenario::Smurfing: smurf(wb, we, out); break;
      case Scenario::PassThrough:
        out.erase(std::remove_if(out.begin() + static_cast<std::ptrdiff_t>(start), out.end(), in_window), out.end());
        pass_through(wb, we, out);
        break;
      case Scenario::DormantBurst:
        out.erase(std::remove_if(out.begin() + static_cast<std::ptrdiff_t>(start), out.end(), in_window), out.end());
        ensure_base_activity(start, out);
        burst(wb, we, out);
        break;
      case Scenario::DropOff:
        out.erase(std::remove_if(out.begin() + static_cast<std::ptrdiff_t>(start), out.end(), in_window), out.end());
        out.push_back(ordinary(uniform_time(wb, we)));
        break;
    }
  }

 private:
  const GeneratorConfig& cfg_;
  const Account& acct_;
  const ArchetypeParams& p_;
  std::mt19937_64 rng_;
  double median_ = 0;
  double rate_ = 0;
  double salary_ = 0;
  std::vector<std::uint16_t> pool_;

  double u01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  Timestamp uniform_time(Timestamp from, Timestamp to) {
    const auto span = (to - from).count();
    std::uniform_int_distribution<long long> d(0, std::max<long long>(0, span - 1));
    return from + seconds{d(rng_)};
  }

  Timestamp time_in(YearMonth ym) {
    const Timestamp from = sys_days{ym / day{1}};
    const Timestamp to = sys_days{(ym + months{1}) / day{1}};
    return uniform_time(from, to);
  }

  double draw_amount() {
    if (p_.near_limit > 0 && u01() < p_.near_limit)
      return std::uniform_real_distribution<double>(p_.near_low, p_.near_high)(rng_);
    return std::lognormal_distribution<double>(std::log(median_), p_.sigma)(rng_);
  }

  std::uint16_t service() {
    return pool_[std::uniform_int_distribution<std::size_t>(0, pool_.size() - 1)(rng_)];
  }

  Transaction base(Timestamp t) {
    Transaction tx;
    tx.key = acct_.key;
    tx.timestamp = t;
    tx.service_code = service();
    return tx;
  }

  Transaction ordinary(Timestamp t) {
    Transaction tx = base(t);
    tx.amount = to_money(draw_amount());
    if (u01() < p_.credit_share) {
      tx.direction = Direction::Credit;
    } else {
      tx.direction = Direction::Debit;
      const double r = u01();
      if (r < p_.ted_share) tx.destination = Destination::OtherBankTED;
      else if (r < p_.ted_share + p_.doc_share) tx.destination = Destination::OtherBankDOC;
      else if (r < p_.ted_share + p_.doc_share + p_.same_bank_share) tx.destination = Destination::SameBank;
    }
    return tx;
  }

  void month(YearMonth ym, std::vector<Transaction>& out) {
    if (salary_ > 0 && u01() < 0.95) {
      Transaction tx = base(sys_days{ym / day{5}} + hours{8});
      tx.service_code = pool_.front();
      tx.direction = Direction::Credit;
      tx.amount = to_money(salary_ * std::lognormal_distribution<double>(0.0, 0.05)(rng_));
      out.push_back(tx);
    }
    const int n = std::poisson_distribution<int>(rate_)(rng_);
    for (int i = 0; i < n; ++i) out.push_back(ordinary(time_in(ym)));
    const int fees = std::poisson_distribution<int>(cfg_.fee_rate)(rng_);
    for (int i = 0; i < fees; ++i) {
      Transaction tx = base(time_in(ym));
      constexpr TxKind kinds[] = {TxKind::Fee, TxKind::Commission, TxKind::Interest, TxKind::Tax};
      tx.kind = kinds[std::uniform_int_distribution<int>(0, 3)(rng_)];
      tx.direction = tx.kind == TxKind::Interest ? Direction::Credit : Direction::Debit;
      tx.amount = to_money(std::uniform_real_distribution<double>(1.0, 60.0)(rng_));
      out.push_back(tx);
    }
  }

  void ensure_base_activity(std::size_t start, std::vector<Transaction>& out) {
    const Timestamp c1_end = sys_days{cfg_.cycle(2).first / day{1}};
    for (std::size_t i = start; i < out.size(); ++i)
      if (out[i].kind == TxKind::Ordinary && out[i].timestamp < c1_end) return;
    out.push_back(ordinary(time_in(cfg_.first_cycle + months{6})));
  }

  void smurf(Timestamp wb, Timestamp we, std::vector<Transaction>& out) {
    const int n = std::uniform_int_distribution<int>(6, 12)(rng_);
    for (int i = 0; i < n; ++i) {
      Transaction tx = base(uniform_time(wb, we));
      tx.direction = Direction::Credit;
      tx.amount = to_money(std::uniform_real_distribution<double>(80000.0, 99999.99)(rng_));
      out.push_back(tx);
    }
  }

  void pass_through(Timestamp wb, Timestamp we, std::vector<Transaction>& out) {
    const int n = std::uniform_int_distribution<int>(3, 5)(rng_);
    const Timestamp last_credit = we - days{4};
    for (int i = 0; i < n; ++i) {
      const double value =
          std::clamp(std::lognormal_distribution<double>(std::log(60000.0), 0.5)(rng_), 12000.0, 400000.0);
      Transaction in = base(uniform_time(wb, std::max(last_credit, wb + hours{1})));
      in.direction = Direction::Credit;
      in.amount = to_money(value);
      Transaction outgoing = base(in.timestamp + days{std::uniform_int_distribution<int>(1, 3)(rng_)});
      outgoing.direction = Direction::Debit;
      outgoing.destination = Destination::OtherBankTED;
      outgoing.amount = to_money(value * std::uniform_real_distribution<double>(0.95, 1.0)(rng_));
      if (outgoing.timestamp >= we) outgoing.timestamp = we - seconds{1};
      out.push_back(in);
      out.push_back(outgoing);
    }
  }

  void burst(Timestamp wb, Timestamp we, std::vector<Transaction>& out) {
    const int n = std::uniform_int_distribution<int>(15, 25)(rng_);
    for (int i = 0; i < n; ++i) {
      Transaction tx = base(uniform_time(wb, we));
      tx.amount = to_money(std::lognormal_distribution<double>(std::log(2000.0), 0.8)(rng_));
      tx.direction = u01() < 0.5 ? Direction::Credit : Direction::Debit;
      out.push_back(tx);
    }
  }
};

/// Largest-remainder split of n into the given shares.
std::vector<int> apportion(int n, const std::vector<double>& shares) {
  std::vector<int> out(shares.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = n * shares[i];
    out[i] = static_cast<int>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - out[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < n && i < rem.size(); ++i, ++used) ++out[rem[i].second];
  return out;
}

std::string padded(const char* prefix, long long v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%07lld", prefix, v);
  return buf;
}

Archetype scenario_target(Scenario s) {
  switch (s) {
    case Scenario::Smurfing: return Archetype::Standard;
    case Scenario::DormantBurst: return Archetype::LowUsage;
    default: return Archetype::Risk1;
  }
}

}  // namespace

Dataset generate(const GeneratorConfig& config) {
  config.validate();
  Dataset data;
  std::mt19937_64 rng(mix(config.seed));

  const int n_entity = static_cast<int>(std::llround(config.clients * config.entity_share));
  const int n_singular = config.clients - n_entity;

  auto roster = [&](const std::map<Archetype, ArchetypeParams>& params, int n) {
    std::vector<Archetype> kinds;
    std::vector<double> shares;
    for (const auto& [a, p] : params) {
      kinds.push_back(a);
      shares.push_back(p.share);
    }
    auto counts = apportion(n, shares);
    std::vector<Archetype> out;
    for (std::size_t i = 0; i < kinds.size(); ++i) out.insert(out.end(), static_cast<std::size_t>(counts[i]), kinds[i]);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
  };
  const auto singular = roster(config.singular, n_singular);
  const auto entity = roster(config.entity, n_entity);

  std::vector<Account> accounts;
  accounts.reserve(static_cast<std::size_t>(config.clients * (1 + config.second_account_share)) + 1);
  std::uniform_int_distribution<int> agency(1, 150);
  std::uniform_int_distribution<int> age_days(30, 35 * 365);
  const sys_days cycle_start{config.first_cycle / day{1}};
  for (int i = 0; i < config.clients; ++i) {
    const bool is_entity = i >= n_singular;
    const ClientKind kind = is_entity ? ClientKind::LegalEntity : ClientKind::SingularPerson;
    const Archetype arch = is_entity ? entity[static_cast<std::size_t>(i - n_singular)]
                                     : singular[static_cast<std::size_t>(i)];
    const auto& params = is_entity ? config.entity : config.singular;
    ingest::ClientRecord rec;
    rec.client_id = padded("C", i + 1);
    rec.kind = kind;
    rec.account_opened = year_month_day{cycle_start - days{age_days(rng)}};
    data.clients.push_back(rec);

    char ag[8];
    std::snprintf(ag, sizeof ag, "%04d", agency(rng));
    accounts.push_back({{rec.client_id, ag, padded("CC-", i + 1)}, kind, arch, &params.at(arch)});
    if (std::uniform_real_distribution<double>(0, 1)(rng) < config.second_account_share)
      accounts.push_back({{rec.client_id, ag, padded("PP-", i + 1)}, kind, Archetype::LowUsage,
                          &params.at(Archetype::LowUsage)});
  }

  // scenario targets: distinct primary accounts of singular clients
  std::map<Archetype, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < accounts.size(); ++i)
    if (accounts[i].kind == ClientKind::SingularPerson && product_of(accounts[i].key) == "CC")
      pools[accounts[i].archetype].push_back(i);
  for (auto& [_, pool] : pools) std::shuffle(pool.begin(), pool.end(), rng);
  for (auto [scenario, count] : config.scenarios) {
    auto& pool = pools[scenario_target(scenario)];
    if (static_cast<std::size_t>(count) > pool.size())
      throw ConfigError("scenario " + std::string(to_string(scenario)) + " needs " + std::to_string(count) +
                        " " + std::string(to_string(scenario_target(scenario))) + " accounts, only " +
                        std::to_string(pool.size()) + " available");
    for (int j = 0; j < count; ++j) {
      auto& acct = accounts[pool.back()];
      pool.pop_back();
      acct.scenario = scenario;
      data.truth.emplace(acct.key, scenario);
    }
  }

  for (std::size_t i = 0; i < accounts.size(); ++i) {
    const auto& acct = accounts[i];
    data.planted.emplace(acct.key, std::pair{acct.kind, acct.archetype});
    AccountGenerator(config, acct, i).run(data.transactions);
  }
  std::stable_sort(data.transactions.begin(), data.transactions.end(),
                   [](const Transaction& a, const Transaction& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.key < b.key;
                   });
  return data;
}

// ---------------------------------------------------------------------------
// files

std::string truth_header() { return "client_id;agency;account;scenario"; }

GroundTruth parse_truth(std::string_view text) {
  GroundTruth out;
  bool header = true;
  std::size_t lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (header) {
      if (line != truth_header()) throw ValidationError("truth file: unexpected header");
      header = false;
      continue;
    }
    auto cols = split(line, ';');
    auto s = cols.size() == 4 ? parse_scenario(cols[3]) : std::nullopt;
    if (!s) throw ValidationError("truth file line " + std::to_string(lineno) + ": malformed");
    out.emplace(AccountKey{std::string(cols[0]), std::string(cols[1]), std::string(cols[2])}, *s);
  }
  return out;
}

void emit(const Dataset& data, const std::filesystem::path& dir, const EmitOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string ext = options.gzip ? ".csv.gz" : ".csv";

  std::string clients = ingest::client_header() + "\n";
  for (const auto& c : data.clients) clients += ingest::format_client(c) + "\n";
  ingest::write_text_file(dir / ("clients" + ext), clients, options.gzip);

  std::string txs = ingest::transaction_header() + "\n";
  txs.reserve(data.transactions.size() * 72);
  for (const auto& t : data.transactions) {
    txs += ingest::format_transaction(t);
    txs += '\n';
  }
  ingest::write_text_file(dir / ("transactions" + ext), txs, options.gzip);

  std::string truth = truth_header() + "\n";
  for (const auto& [k, s] : data.truth)
    truth += k.client_id + ";" + k.agency + ";" + k.account + ";" + std::string(to_string(s)) + "\n";
  ingest::write_text_file(dir / ("truth" + ext), truth, options.gzip);
}

}  // namespace aml::datagen
