#pragma once

// Small builders shared by the unit tests.

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include <unistd.h>

#include "aml/core.hpp"
#include "aml/ingest.hpp"
#include "aml/profiler.hpp"

namespace aml::test {

inline Date ymd(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

inline YearMonth ym(int y, unsigned m) { return YearMonth{std::chrono::year{y}, std::chrono::month{m}}; }

inline AccountKey akey(const std::string& client, const std::string& product = "CC") {
  return {client, "0001", product + "-" + client};
}

inline ingest::Transaction tx(const AccountKey& k, Date d, double amount,
                              ingest::Direction dir = ingest::Direction::Debit,
                              ingest::Destination dest = ingest::Destination::None,
                              std::uint16_t service = 100,
                              ingest::TxKind kind = ingest::TxKind::Ordinary) {
  ingest::Transaction t;
  t.key = k;
  t.timestamp = start_of(d) + std::chrono::hours{10};
  t.amount = Money::from_cents(static_cast<std::int64_t>(amount * 100 + 0.5));
  t.direction = dir;
  t.service_code = service;
  t.destination = dest;
  t.kind = kind;
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("aml-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Fixed clock ticking one second per call, shared across copies.
inline std::function<std::string()> tick_clock() {
  auto n = std::make_shared<int>(0);
  return [n] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2017-03-02T20:%02d:%02dZ", (*n / 60) % 60, *n % 60);
    ++*n;
    return std::string(buf);
  };
}

}  // namespace aml::test
