#pragma once

// Seeded synthetic populations: clients with one or two accounts, two annual
// cycles of transactions drawn per behavioral archetype, and labeled
// laundering scenarios injected into the analysis window of cycle two.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aml/ingest.hpp"
#include "aml/profiler.hpp"

namespace aml::datagen {

enum class Scenario : std::uint8_t { None, Smurfing, PassThrough, DormantBurst, DropOff };
std::string_view to_string(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view s);

/// Behavior templates. Singular persons use all five; entities skip Risk1.
enum class Archetype : std::uint8_t { LowUsage, Standard, Risk1, Risk2, Risk3 };
std::string_view to_string(Archetype a);

struct ArchetypeParams {
  double share = 0;           // of the segment's clients
  double rate = 1;            // Poisson mean of ordinary movements per month
  double median = 500;        // lognormal amount median, currency units
  double sigma = 1;           // lognormal shape
  double near_limit = 0;      // probability that an amount is drawn from [low, high)
  double near_low = 80000;
  double near_high = 99999.99;
  double credit_share = 0.5;  // of ordinary movements
  double ted_share = 0.1;     // of debits
  double doc_share = 0.1;     // of debits, DOC
  double same_bank_share = 0.1;
  double salary = 0;          // monthly credit median, 0 for none
  int services = 3;           // size of the service pool
};

std::map<Archetype, ArchetypeParams> default_archetypes(ClientKind kind);

struct GeneratorConfig {
  std::uint64_t seed = 20161130;
  int clients = 46000;
  double entity_share = 0.08;
  double second_account_share = 0.08;
  YearMonth first_cycle{std::chrono::year{2015}, std::chrono::month{1}};
  Date analysis_date{std::chrono::year{2016}, std::chrono::month{12}, std::chrono::day{1}};
  double fee_rate = 0.3;  // non-ordinary entries per account-month
  profiler::BandSchema bands = profiler::BandSchema::standard();
  std::map<Scenario, int> scenarios{{Scenario::Smurfing, 10},
                                    {Scenario::PassThrough, 10},
                                    {Scenario::DormantBurst, 10},
                                    {Scenario::DropOff, 10}};
  std::map<Archetype, ArchetypeParams> singular = default_archetypes(ClientKind::SingularPerson);
  std::map<Archetype, ArchetypeParams> entity = default_archetypes(ClientKind::LegalEntity);

  static GeneratorConfig defaults();
  /// `key = value` lines, '#' comments. Unknown keys throw ConfigError.
  static GeneratorConfig parse(std::string_view text);
  static GeneratorConfig load(const std::filesystem::path& file);
  std::string to_text() const;
  void validate() const;

  profiler::Cycle cycle(int n) const;  // n = 1 or 2
};

using GroundTruth = std::map<AccountKey, Scenario>;

struct Dataset {
  std::vector<ingest::ClientRecord> clients;
  std::vector<ingest::Transaction> transactions;  // both cycles, all kinds
  GroundTruth truth;                              // injected accounts only
  std::map<AccountKey, std::pair<ClientKind, Archetype>> planted;
};

/// Deterministic for a given config. Throws ConfigError when scenarios ask
/// for more accounts than their archetype provides.
Dataset generate(const GeneratorConfig& config);

struct EmitOptions {
  bool gzip = false;
};

/// Writes clients.csv, transactions.csv and truth.csv (".gz" appended when
/// compressed). Throws IoError.
void emit(const Dataset& data, const std::filesystem::path& dir, const EmitOptions& options = {});

std::string truth_header();
GroundTruth parse_truth(std::string_view text);

using aml::product_of;

}  // namespace aml::datagen
