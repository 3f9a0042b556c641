#pragma once

// Shared value types: money, calendar, identifiers, error hierarchy.

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aml {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable file or stream.
struct IoError : Error {
  using Error::Error;
};

/// Bad configuration: schema mappings, knobs out of range, missing setup.
struct ConfigError : Error {
  using Error::Error;
};

/// A value outside the domain of the operation (e.g. a non-positive amount).
struct DomainError : Error {
  using Error::Error;
};

/// Rule bank or model artifact failed validation.
struct ValidationError : Error {
  using Error::Error;
};

struct NotFoundError : Error {
  using Error::Error;
};

struct ConflictError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Money: exact fixed point in cents.

class Money {
 public:
  constexpr Money() = default;
  static constexpr Money from_cents(std::int64_t cents) { return Money(cents); }
  static constexpr Money units(std::int64_t whole) { return Money(whole * 100); }

  /// Parses "123", "123.4", "123.45". Rejects signs, exponents and more than
  /// two decimals.
  static std::optional<Money> parse(std::string_view text);

  constexpr std::int64_t cents() const { return cents_; }
  constexpr double as_double() const { return static_cast<double>(cents_) / 100.0; }
  std::string to_string() const;

  constexpr Money& operator+=(Money o) {
    cents_ += o.cents_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return Money(a.cents_ + b.cents_); }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t c) : cents_(c) {}
  std::int64_t cents_ = 0;
};

// ---------------------------------------------------------------------------
// Calendar

using Date = std::chrono::year_month_day;
using Timestamp = std::chrono::sys_seconds;
using YearMonth = std::chrono::year_month;

std::optional<Date> parse_date(std::string_view text);            // YYYY-MM-DD
std::optional<Timestamp> parse_timestamp(std::string_view text);  // YYYY-MM-DD[THH:MM[:SS]][Z]
std::optional<YearMonth> parse_year_month(std::string_view text); // YYYY-MM
std::string format_date(Date d);
std::string format_timestamp(Timestamp t);
std::string format_year_month(YearMonth ym);

Date date_of(Timestamp t);
Timestamp start_of(Date d);

/// Same day-of-month `n` months later (earlier for negative n), clamped to
/// the last day of the target month.
Date add_months_clamped(Date d, int n);

/// Whole months from `from` to `to` (to - from).
int months_between(YearMonth from, YearMonth to);

/// Completed years between two dates.
int whole_years_between(Date from, Date to);

// ---------------------------------------------------------------------------
// Versions: DDMMYYYY.SS

struct Version {
  Date date{};
  int sequence = 1;

  static std::optional<Version> parse(std::string_view text);
  std::string to_string() const;
  friend bool operator==(const Version&, const Version&) = default;
  friend auto operator<=>(const Version& a, const Version& b) {
    if (auto c = a.date <=> b.date; c != 0) return c;
    return a.sequence <=> b.sequence;
  }
};

// ---------------------------------------------------------------------------
// Identifiers and enums

struct AccountKey {
  std::string client_id;
  std::string agency;
  std::string account;

  friend auto operator<=>(const AccountKey&, const AccountKey&) = default;
  friend bool operator==(const AccountKey&, const AccountKey&) = default;
  std::string to_string() const { return client_id + "/" + agency + "/" + account; }
};

/// Product line of an account: the account prefix before '-', e.g.
/// "CC-0001234" -> "CC". Accounts without a prefix are "CC".
std::string product_of(const AccountKey& key);

struct AccountKeyHash {
  std::size_t operator()(const AccountKey& k) const noexcept;
};

enum class ClientKind : std::uint8_t { SingularPerson, LegalEntity };

enum class ProfileClass : std::uint8_t { LowUsage, Standard, Risk1, Risk2, Risk3 };
inline constexpr ProfileClass kAllClasses[] = {ProfileClass::LowUsage, ProfileClass::Standard,
                                               ProfileClass::Risk1, ProfileClass::Risk2,
                                               ProfileClass::Risk3};

std::string_view to_string(ClientKind k);
std::string_view to_string(ProfileClass c);
std::optional<ProfileClass> parse_profile_class(std::string_view text);
std::optional<ClientKind> parse_client_kind(std::string_view text);

/// Classes whose profiles may be promoted during analysis.
constexpr bool is_reclassifiable(ProfileClass c) {
  return c == ProfileClass::LowUsage || c == ProfileClass::Standard || c == ProfileClass::Risk1;
}

enum class LimitBasis : std::uint8_t { AnnualTotal, MonthlyMax };

constexpr LimitBasis limit_basis(ProfileClass c) {
  return (c == ProfileClass::LowUsage || c == ProfileClass::Standard) ? LimitBasis::AnnualTotal
                                                                       : LimitBasis::MonthlyMax;
}

/// Severity order used when several reclassification targets compete.
constexpr int severity(ProfileClass c) { return static_cast<int>(c); }

// ---------------------------------------------------------------------------
// Small text helpers shared by the line-oriented formats.

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);
std::optional<long long> parse_int(std::string_view s);
std::optional<double> parse_double(std::string_view s);

/// "%.17g"-style round-trippable rendering.
std::string format_double(double v);
/// Shortest text that reads back as `v` ("5", "12.5").
std::string short_decimal(double v);

}  // namespace aml
