#pragma once

// From input files to the artifacts the agents work on: the reference
// profile base, the learned model bundle and joined window profiles.

#include <filesystem>
#include <optional>
#include <vector>

#include "aml/agents/runtime.hpp"
#include "aml/ingest.hpp"
#include "aml/learner/pipeline.hpp"
#include "aml/profiler.hpp"

namespace aml::service {

struct InputData {
  std::vector<ingest::ClientRecord> clients;
  std::vector<ingest::Transaction> transactions;
  std::vector<std::string> problems;  // "file:line: message"
};

/// Reads clients.csv and transactions.csv from `dir`, each optionally
/// gzip-compressed (".gz"). Throws IoError when a file is missing.
InputData load_input(const std::filesystem::path& dir);

struct Prepared {
  ingest::Registry registry;
  std::vector<ingest::Transaction> relevant;  // ordinary movements of known clients
  profiler::Cycle reference;
  profiler::ProfileOptions options;
  profiler::ProfileMap base;  // reference cycle, both segments
  std::size_t unknown_clients = 0;
};

/// Reference cycle defaults to the twelve months starting at the earliest
/// relevant transaction.
Prepared prepare(InputData input, std::optional<YearMonth> reference_first = std::nullopt,
                 profiler::ProfileOptions options = {});

std::vector<profiler::ClientProfile> segment_profiles(const profiler::ProfileMap& base, ClientKind kind);

struct LearnSettings {
  learner::LearnOptions singular;
  learner::LearnOptions entity;
};

/// Learns both segments. The version date is the last day of the reference
/// cycle, the sequence follows `existing`.
learner::ModelBundle learn_models(const Prepared& p, const LearnSettings& settings,
                                  std::span<const Version> existing = {});

/// Reference profiles of the accounts active in the window ending at the
/// analysis date, with their window values.
std::vector<profiler::ClientProfile> window_profiles(const Prepared& p, Date analysis_date);

/// Profiles of the cycle following the reference one.
profiler::ProfileMap next_cycle_profiles(const Prepared& p);

/// client -> products of every account seen in the relevant movements.
agents::ClientDirectory client_directory(const Prepared& p);
std::vector<std::string> products(const Prepared& p);

/// Bundles under `models_dir`, one sub-directory per version.
std::vector<Version> stored_model_versions(const std::filesystem::path& models_dir);
std::filesystem::path model_dir(const std::filesystem::path& models_dir, const Version& v);

}  // namespace aml::service
