#pragma once

// Decision matrix of the decision-support agent and its append-only log.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aml/agents/messages.hpp"

namespace aml::agents {

/// Per attribute: '0' no window activity, '1' window/max in (0, 0.5],
/// '2' in (0.5, 1], '3' above 1 (or activity with a zero max).
char ratio_bucket(double window_value, double monthly_max);
std::string attribute_signature(const profiler::ClientProfile& p);

/// "<sorted rule ids joined by ','>|<class>|<signature>"
std::string matrix_key(const rules::Suspicion& s);

struct MatrixOptions {
  double threshold = 0.9;
  std::size_t min_support = 5;
};

struct MatrixCell {
  std::size_t confirmed = 0;
  std::size_t rejected = 0;

  std::size_t support() const { return confirmed + rejected; }
  friend bool operator==(const MatrixCell&, const MatrixCell&) = default;
};

/// A pending change to one cell. Only validated proposals reach the matrix.
struct MatrixProposal {
  std::string key;
  std::size_t add_confirmed = 0;
  std::size_t add_rejected = 0;

  bool empty() const { return add_confirmed == 0 && add_rejected == 0; }
};

class DecisionMatrix {
 public:
  explicit DecisionMatrix(MatrixOptions options = {});

  /// Confirmed or Rejected once the cell has enough support and agreement,
  /// Escalated otherwise.
  Verdict decide(const std::string& key) const;
  const MatrixCell* cell(const std::string& key) const;
  const std::map<std::string, MatrixCell>& cells() const { return cells_; }
  const MatrixOptions& options() const { return options_; }

  /// Throws ValidationError for an empty key.
  void apply(const MatrixProposal& p);

  /// Sorted keys, fixed layout. Two matrices are equal iff their canonical
  /// texts are equal.
  std::string canonical() const;
  nlohmann::json to_json() const;

 private:
  MatrixOptions options_;
  std::map<std::string, MatrixCell> cells_;
};

struct DecisionRecord {
  std::uint64_t seq = 0;
  std::string at;  // UTC timestamp from the injected clock
  std::string suspicion_id;
  std::string matrix_key;
  Verdict verdict = Verdict::Escalated;
  Source source = Source::Agent;
  std::string request_id;

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

nlohmann::json to_json(const DecisionRecord& r);
DecisionRecord record_from_json(const nlohmann::json& j);

/// Analyst verdicts weigh one, agent verdicts and escalations weigh zero.
MatrixProposal learn(const DecisionRecord& r);

/// Throws ValidationError when the record cannot train: unknown key shape,
/// analyst escalation.
void validate(const DecisionRecord& r);

/// Folds analyst records into a fresh matrix.
DecisionMatrix replay(const std::vector<DecisionRecord>& log, MatrixOptions options = {});

/// NDJSON, one record per line. Throws IoError / ValidationError.
std::vector<DecisionRecord> read_decision_log(const std::filesystem::path& file);
void append_decision_log(const std::filesystem::path& file, const DecisionRecord& r);

using Clock = std::function<std::string()>;
/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string system_clock_now();

enum class CaseState : std::uint8_t { AgentDecided, Escalated, AnalystDecided };

struct CaseStatus {
  CaseState state = CaseState::Escalated;
  Verdict verdict = Verdict::Escalated;
  std::string matrix_key;
  std::string request_id;
};

/// State behind the decision-support agent: matrix, log and the status of
/// every suspicion seen so far. Rebuilt from the log on construction.
class DecisionEngine {
 public:
  DecisionEngine(MatrixOptions options, Clock clock, std::optional<std::filesystem::path> log_file);

  /// Decides one suspicion and logs the outcome. A suspicion already
  /// settled by an analyst keeps that verdict; one still waiting stays
  /// escalated without a new record.
  DecisionOutcome assess(const rules::Suspicion& s, const std::string& request_id);

  /// Analyst verdict on an escalated case. Throws NotFoundError for an
  /// unknown or never-escalated id, ConflictError when already settled,
  /// ValidationError for an Escalated verdict.
  DecisionOutcome record_analyst(const std::string& suspicion_id, Verdict verdict);

  /// Would record_analyst accept this verdict? Same exceptions, no effect.
  void check_analyst(const std::string& suspicion_id, Verdict verdict) const;

  const DecisionMatrix& matrix() const { return matrix_; }
  const std::vector<DecisionRecord>& log() const { return log_; }
  const CaseStatus* status(const std::string& suspicion_id) const;
  std::vector<std::string> pending() const;

 private:
  DecisionRecord append(std::string suspicion_id, std::string key, Verdict v, Source s,
                        std::string request_id);

  DecisionMatrix matrix_;
  Clock clock_;
  std::optional<std::filesystem::path> log_file_;
  std::vector<DecisionRecord> log_;
  std::map<std::string, CaseStatus> cases_;
};

}  // namespace aml::agents
