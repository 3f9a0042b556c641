#pragma once

// Behavioral profiles per (client, agency, account): eleven aggregated
// attributes plus account age, each carried as annual total, maximum
// monthly value and the value observed in the analysis window.

#include <array>
#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "aml/core.hpp"
#include "aml/ingest.hpp"

namespace aml::profiler {

enum class Attribute : std::uint8_t {
  Serv,
  Movl,
  Band1,
  Band2,
  Band3,
  Band4,
  Band5,
  Band6,
  PctDeb,
  PctTed,
  PctDoc,
};
inline constexpr std::size_t kAttributeCount = 11;
inline constexpr std::size_t kBandCount = 6;

/// Display name as printed in reports and rule texts ("Serv", "Fxlvr3", ...).
std::string_view display_name(Attribute a);
/// Lower-case name used by the rule predicate language ("serv", "fxlvr3", ...).
std::string_view rule_name(Attribute a);
std::optional<Attribute> parse_rule_name(std::string_view s);
constexpr Attribute band_attribute(int band) {
  return static_cast<Attribute>(static_cast<int>(Attribute::Band1) + band - 1);
}
constexpr bool is_percent(Attribute a) { return a >= Attribute::PctDeb; }

struct AttributeTriple {
  double annual_total = 0;
  double monthly_max = 0;
  double window_value = 0;

  friend bool operator==(const AttributeTriple&, const AttributeTriple&) = default;
};

struct ClientProfile {
  AccountKey key;
  ClientKind client_kind = ClientKind::SingularPerson;
  int account_age_years = 0;
  std::array<AttributeTriple, kAttributeCount> attrs{};

  AttributeTriple& operator[](Attribute a) { return attrs[static_cast<std::size_t>(a)]; }
  const AttributeTriple& operator[](Attribute a) const {
    return attrs[static_cast<std::size_t>(a)];
  }

  friend bool operator==(const ClientProfile&, const ClientProfile&) = default;
};

using ProfileMap = std::map<AccountKey, ClientProfile>;

/// Five strictly increasing thresholds splitting (0, inf) into six half-open
/// value bands.
struct BandSchema {
  std::array<Money, kBandCount - 1> thresholds;

  /// 1k, 5k, 10k, 50k, 100k currency units.
  static BandSchema standard();
  void validate() const;
};

/// Band index 1..6 such that thresholds[b-2] <= amount < thresholds[b-1].
/// Throws DomainError for amount <= 0.
int value_band(Money amount, const BandSchema& schema);

inline constexpr double kDefaultPercentCeiling = 999.99;

/// 100 * debited / credited for one month of one account. Zero activity
/// yields 0, debits without credits yield `ceiling`. Throws DomainError when
/// transactions belong to more than one account.
double pct_debit_month(std::span<const ingest::Transaction> month_txs,
                       double ceiling = kDefaultPercentCeiling);

/// Twelve consecutive calendar months starting at `first`.
struct Cycle {
  YearMonth first;

  YearMonth last() const { return first + std::chrono::months{11}; }
  /// Month index 0..11, or -1 outside the cycle.
  int month_index(Timestamp t) const;
  Date end_date() const;  // last day of the last month
};

struct ProfileOptions {
  BandSchema bands = BandSchema::standard();
  double percent_ceiling = kDefaultPercentCeiling;
};

/// Sufficient statistics for one account over one period.
struct PeriodAggregate {
  std::vector<std::uint16_t> services;  // sorted, unique
  std::int64_t movements = 0;
  std::array<std::int64_t, kBandCount> bands{};
  std::int64_t debit_cents = 0;
  std::int64_t credit_cents = 0;
  std::int64_t ted_cents = 0;
  std::int64_t doc_cents = 0;

  void add(const ingest::Transaction& tx, const BandSchema& bands);
  void merge(const PeriodAggregate& other);
  /// Per-period values of the eleven attributes.
  std::array<double, kAttributeCount> values(double percent_ceiling) const;
};

/// Monthly aggregates of one account across a cycle. Accumulators for the
/// same account merge month by month, which makes profiling a fold that can
/// be sharded by key or by month.
struct CycleAccumulator {
  std::array<PeriodAggregate, 12> months;

  void merge(const CycleAccumulator& other);
  /// annual_total = 12-month sum for counts and value-weighted ratio for
  /// percents; monthly_max = maximum monthly value; window_value = 0.
  std::array<AttributeTriple, kAttributeCount> finalize(double percent_ceiling) const;
};

struct ProfileBuild {
  ProfileMap profiles;
  std::size_t outside_cycle = 0;
};

/// Aggregates relevance-filtered transactions into one profile per account
/// with activity in the cycle. Account age and client kind come from the
/// registry when given.
ProfileBuild build_profiles(std::span<const ingest::Transaction> txs, const Cycle& cycle,
                            const ProfileOptions& options = {},
                            const ingest::Registry* registry = nullptr);

/// Window values over [analysis_date - 1 month, analysis_date). Accounts
/// silent in the window are absent. Only `window_value` fields are set.
ProfileMap window_profile(std::span<const ingest::Transaction> txs, Date analysis_date,
                          const ProfileOptions& options = {},
                          const ingest::Registry* registry = nullptr);

struct WindowSpan {
  Date begin;  // inclusive
  Date end;    // exclusive
};
WindowSpan lookback_window(Date analysis_date);

struct JoinedProfiles {
  std::vector<ClientProfile> profiles;  // sorted by key
  std::vector<AccountKey> unprofiled;   // active in window, absent from base
};

/// Copies window values onto the reference profiles of the accounts active
/// in the window.
JoinedProfiles attach_window(const ProfileMap& base, const ProfileMap& window);

/// Keeps profiles with movl.window_value >= min_movements.
std::vector<ClientProfile> activity_filter(std::vector<ClientProfile> profiles,
                                           long long min_movements = 1);

// Profile store: one record per account, header documents every column.
std::string profile_store_header();
void write_profile_store(std::ostream& out, const ProfileMap& profiles);
ProfileMap read_profile_store(std::istream& in);

}  // namespace aml::profiler
