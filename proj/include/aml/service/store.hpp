#pragma once

// Analysis runs and their persistence in a single append-only JSON-lines
// file.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aml/agents/messages.hpp"

namespace aml::service {

struct RuleInfo {
  std::string text;
  std::string citation;
  friend bool operator==(const RuleInfo&, const RuleInfo&) = default;
};

struct SegmentInfo {
  std::size_t learned_rules = 0;
  Version model_version;
  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

struct AnalysisRun {
  std::string id;
  Date analysis_date{};
  std::optional<double> mar = 0.0;
  std::string product{agents::kAllProducts};
  std::optional<std::string> client_id;

  Version bank_version;
  std::size_t normative_rules = 0;
  std::size_t profile_rules = 0;
  Version model_version;
  std::map<ClientKind, SegmentInfo> segments;

  std::size_t analyzed = 0;
  std::map<ClientKind, rules::ClassCounts> phase1;
  std::vector<rules::Suspicion> suspicions;             // sorted by key
  std::vector<agents::DecisionOutcome> agent_verdicts;  // one per suspicion, same order
  std::map<std::string, std::vector<std::size_t>> by_rule;  // rule id -> 1-based ordinals
  std::map<std::string, RuleInfo> rule_texts;           // triggered rules only
  std::vector<std::string> errors;

  std::string started_at;
  std::string captured_at;
  std::string analysis_started_at;
  std::string finished_at;

  friend bool operator==(const AnalysisRun&, const AnalysisRun&) = default;
};

/// Deterministic id from what makes a run reproducible.
std::string run_id(Date analysis_date, std::optional<double> mar, const std::string& product,
                   const std::optional<std::string>& client_id, const Version& bank,
                   const Version& models);

nlohmann::json to_json(const AnalysisRun& r);
AnalysisRun run_from_json(const nlohmann::json& j);

/// Runs are immutable once stored; storing an id twice is a ConflictError.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path file);

  void put(const AnalysisRun& run);
  std::optional<AnalysisRun> get(const std::string& id) const;
  std::vector<std::string> ids() const;  // in storage order

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::map<std::string, AnalysisRun> runs_;
  std::vector<std::string> order_;
};

}  // namespace aml::service
