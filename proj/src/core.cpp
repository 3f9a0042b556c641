#include "aml/core.hpp"

#include <charconv>
#include <cstdio>
#include <functional>

namespace aml {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

int to_int(std::string_view s) {
  int v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

}  // namespace

std::optional<Money> Money::parse(std::string_view text) {
  text = trim(text);
  auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (!all_digits(whole) || whole.size() > 15) return std::nullopt;
  if (dot != std::string_view::npos && (frac.empty() || frac.size() > 2 || !all_digits(frac)))
    return std::nullopt;
  std::int64_t w = 0;
  std::from_chars(whole.data(), whole.data() + whole.size(), w);
  std::int64_t f = 0;
  if (!frac.empty()) {
    std::from_chars(frac.data(), frac.data() + frac.size(), f);
    if (frac.size() == 1) f *= 10;
  }
  return Money(w * 100 + f);
}

std::string Money::to_string() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(cents_ / 100),
                static_cast<long long>(cents_ % 100));
  return buf;
}

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto y = text.substr(0, 4), m = text.substr(5, 2), d = text.substr(8, 2);
  if (!all_digits(y) || !all_digits(m) || !all_digits(d)) return std::nullopt;
  Date date{std::chrono::year{to_int(y)}, std::chrono::month{static_cast<unsigned>(to_int(m))},
            std::chrono::day{static_cast<unsigned>(to_int(d))}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  auto date = parse_date(text.substr(0, std::min<std::size_t>(10, text.size())));
  if (!date) return std::nullopt;
  Timestamp ts = start_of(*date);
  if (text.size() == 10) return ts;
  if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
  auto rest = text.substr(11);
  int h = 0, mi = 0, s = 0;
  if (rest.size() == 5 && rest[2] == ':' && all_digits(rest.substr(0, 2)) &&
      all_digits(rest.substr(3, 2))) {
    h = to_int(rest.substr(0, 2));
    mi = to_int(rest.substr(3, 2));
  } else if (rest.size() == 8 && rest[2] == ':' && rest[5] == ':' &&
             all_digits(rest.substr(0, 2)) && all_digits(rest.substr(3, 2)) &&
             all_digits(rest.substr(6, 2))) {
    h = to_int(rest.substr(0, 2));
    mi = to_int(rest.substr(3, 2));
    s = to_int(rest.substr(6, 2));
  } else {
    return std::nullopt;
  }
  if (h > 23 || mi > 59 || s > 59) return std::nullopt;
  return ts + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

std::optional<YearMonth> parse_year_month(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') return std::nullopt;
  auto y = text.substr(0, 4), m = text.substr(5, 2);
  if (!all_digits(y) || !all_digits(m)) return std::nullopt;
  YearMonth ym{std::chrono::year{to_int(y)}, std::chrono::month{static_cast<unsigned>(to_int(m))}};
  if (!ym.ok()) return std::nullopt;
  return ym;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  auto day = std::chrono::floor<std::chrono::days>(t);
  std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d", format_date(Date{day}).c_str(),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string format_year_month(YearMonth ym) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(ym.year()),
                static_cast<unsigned>(ym.month()));
  return buf;
}

Date date_of(Timestamp t) { return Date{std::chrono::floor<std::chrono::days>(t)}; }

Timestamp start_of(Date d) { return Timestamp{std::chrono::sys_days{d}}; }

Date add_months_clamped(Date d, int n) {
  YearMonth ym = d.year() / d.month();
  ym += std::chrono::months{n};
  auto last = std::chrono::year_month_day_last{ym.year(), std::chrono::month_day_last{ym.month()}};
  auto day = std::min(d.day(), last.day());
  return Date{ym.year(), ym.month(), day};
}

int months_between(YearMonth from, YearMonth to) {
  return (static_cast<int>(to.year()) - static_cast<int>(from.year())) * 12 +
         (static_cast<int>(static_cast<unsigned>(to.month())) -
          static_cast<int>(static_cast<unsigned>(from.month())));
}

int whole_years_between(Date from, Date to) {
  int years = static_cast<int>(to.year()) - static_cast<int>(from.year());
  auto md_to = std::make_pair(static_cast<unsigned>(to.month()), static_cast<unsigned>(to.day()));
  auto md_from =
      std::make_pair(static_cast<unsigned>(from.month()), static_cast<unsigned>(from.day()));
  if (md_to < md_from) --years;
  return std::max(years, 0);
}

std::optional<Version> Version::parse(std::string_view text) {
  if (text.size() != 11 || text[8] != '.') return std::nullopt;
  auto dd = text.substr(0, 2), mm = text.substr(2, 2), yyyy = text.substr(4, 4),
       ss = text.substr(9, 2);
  if (!all_digits(dd) || !all_digits(mm) || !all_digits(yyyy) || !all_digits(ss))
    return std::nullopt;
  Date d{std::chrono::year{to_int(yyyy)}, std::chrono::month{static_cast<unsigned>(to_int(mm))},
         std::chrono::day{static_cast<unsigned>(to_int(dd))}};
  if (!d.ok()) return std::nullopt;
  return Version{d, to_int(ss)};
}

std::string Version::to_string() const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02u%02u%04d.%02d", static_cast<unsigned>(date.day()),
                static_cast<unsigned>(date.month()), static_cast<int>(date.year()), sequence);
  return buf;
}

std::string product_of(const AccountKey& key) {
  auto dash = key.account.find('-');
  return dash == std::string::npos ? std::string("CC") : key.account.substr(0, dash);
}

std::size_t AccountKeyHash::operator()(const AccountKey& k) const noexcept {
  std::hash<std::string> h;
  std::size_t seed = h(k.client_id);
  seed ^= h(k.agency) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  seed ^= h(k.account) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  return seed;
}

std::string_view to_string(ClientKind k) {
  return k == ClientKind::SingularPerson ? "SingularPerson" : "LegalEntity";
}

std::string_view to_string(ProfileClass c) {
  switch (c) {
    case ProfileClass::LowUsage: return "LowUsage";
    case ProfileClass::Standard: return "Standard";
    case ProfileClass::Risk1: return "Risk1";
    case ProfileClass::Risk2: return "Risk2";
    case ProfileClass::Risk3: return "Risk3";
  }
  return "?";
}

std::optional<ProfileClass> parse_profile_class(std::string_view text) {
  for (auto c : kAllClasses)
    if (to_string(c) == text) return c;
  return std::nullopt;
}

std::optional<ClientKind> parse_client_kind(std::string_view text) {
  if (text == "SingularPerson") return ClientKind::SingularPerson;
  if (text == "LegalEntity") return ClientKind::LegalEntity;
  return std::nullopt;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  return v;
}

std::string short_decimal(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : format_double(v);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace aml
