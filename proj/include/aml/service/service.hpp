#pragma once

// The orchestration surface shared by the CLI and the HTTP API: a data
// directory, the agent deployment working on it and the run store.

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>

#include "aml/agents/runtime.hpp"
#include "aml/service/pipeline.hpp"
#include "aml/service/report.hpp"
#include "aml/service/store.hpp"

namespace httplib {
class Server;
}

namespace aml::service {

/// Files under one data directory.
struct DataLayout {
  std::filesystem::path root;

  std::filesystem::path input() const { return root / "input"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path banks() const { return root / "banks"; }
  std::filesystem::path store() const { return root / "store.jsonl"; }
  std::filesystem::path decisions() const { return root / "decisions.log"; }

  /// `dir` when given, else $AML_DATA_DIR, else ./aml-data.
  static DataLayout resolve(const std::optional<std::filesystem::path>& dir = std::nullopt);
};

struct LearnReport {
  learner::ModelBundle bundle;
  std::filesystem::path written_to;
  std::optional<std::filesystem::path> bank_written;  // when no bank existed
  std::size_t input_problems = 0;
  double seconds = 0;
};

/// Learns a new bundle from the input directory and stores it under
/// models/<version>. Seeds banks/ with the built-in bank if it is empty.
LearnReport learn_workspace(const DataLayout& layout, const LearnSettings& settings = {},
                            std::optional<YearMonth> reference_first = std::nullopt);

struct ServiceConfig {
  DataLayout layout;
  std::optional<std::string> token;  // bearer token required by the HTTP API
  bool mask = true;
  agents::MatrixOptions matrix;
  agents::RuntimeOptions runtime;
  learner::EvolutionOptions evolution;
  agents::Clock clock;  // empty: system clock
  std::optional<YearMonth> reference_first;
};

struct RunRequest {
  Date analysis_date{};
  std::optional<double> mar = 0.0;  // empty: no-margin baseline
  std::string product{agents::kAllProducts};
  std::optional<std::string> client_id;
};

struct TriageItem {
  std::string run_id;
  std::size_t ordinal = 0;  // 1-based
  std::size_t total = 0;
  rules::Suspicion suspicion;
  agents::DecisionOutcome agent;  // verdict at run time
  agents::CaseState state = agents::CaseState::Escalated;
  std::optional<agents::Verdict> analyst;
};

struct QueueFilter {
  std::optional<std::string> rule;
  std::optional<ProfileClass> profile_class;
  std::optional<agents::CaseState> state;
};

std::string_view to_string(agents::CaseState s);
std::optional<agents::CaseState> parse_case_state(std::string_view s);

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  /// Loads input, models and bank on first use. Throws ConfigError naming
  /// the missing piece.
  void ensure_ready();

  /// Executes the three phases through the agents and stores the run, or
  /// returns the stored run with the same id. `reused` tells which.
  AnalysisRun run_analysis(const RunRequest& request, bool* reused = nullptr);

  std::vector<std::string> run_ids() const;
  AnalysisRun get_run(const std::string& id) const;  // NotFoundError
  std::vector<TriageItem> queue(const std::string& run_id, const QueueFilter& filter = {}) const;
  TriageItem item(const std::string& run_id, std::size_t ordinal) const;
  TriageItem post_verdict(const std::string& run_id, std::size_t ordinal, agents::Verdict v);

  std::string report(const std::string& run_id, const std::optional<std::string>& rule = {}) const;

  agents::ProfileSuggestion suggest_profiles();
  std::vector<agents::ProfileSuggestion> open_suggestions() const;
  /// Returns the model version in force afterwards.
  Version validate_profiles(const agents::ProfileValidation& v);

  nlohmann::json decision_matrix() const;
  nlohmann::json rule_bank() const;

  nlohmann::json item_json(const TriageItem& item, const AnalysisRun& run) const;
  nlohmann::json run_summary_json(const AnalysisRun& run) const;

  const ServiceConfig& config() const { return config_; }
  std::shared_ptr<const learner::ModelBundle> models() const;

 private:
  TriageItem make_item(const AnalysisRun& run, std::size_t ordinal) const;
  std::shared_ptr<const std::vector<profiler::ClientProfile>> window(Date d);
  std::string now() const;

  ServiceConfig config_;
  RunStore store_;
  mutable std::recursive_mutex mu_;  // deployment, caches, setup
  std::unique_ptr<Prepared> prepared_;
  std::unique_ptr<rules::BankRegistry> banks_;
  std::unique_ptr<agents::Deployment> deployment_;
  std::map<Date, std::shared_ptr<const std::vector<profiler::ClientProfile>>> windows_;
};

/// Routes under /api/v1 bound to the service.
std::unique_ptr<httplib::Server> make_http_server(Service& service);

}  // namespace aml::service
