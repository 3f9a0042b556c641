#pragma once

// In-process mailbox runtime and the four agent roles.

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>

#include "aml/agents/decision.hpp"
#include "aml/agents/messages.hpp"
#include "aml/learner/evolution.hpp"

namespace aml::agents {

class Outbox {
 public:
  void send(AgentId to, Message m) { out_.push_back({std::move(to), std::move(m)}); }

 private:
  friend class Runtime;
  std::vector<std::pair<AgentId, Message>> out_;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentId id() const = 0;
  virtual void handle(const Envelope& e, Outbox& out) = 0;
};

struct RuntimeOptions {
  std::uint64_t seed = 1;
  bool shuffle = true;                 // deliver a random pending envelope
  double duplicate_probability = 0.0;  // redeliver an agent-bound envelope later
  std::size_t max_deliveries = 10'000'000;
  bool keep_trace = false;
};

/// Single-threaded scheduler. Every agent handles one envelope at a time;
/// the order across pending envelopes is chosen by a seeded generator.
class Runtime {
 public:
  explicit Runtime(RuntimeOptions options = {});

  void add(std::shared_ptr<Agent> agent);  // throws ConfigError on a taken id
  void remove(const AgentId& id);
  bool has(const AgentId& id) const;
  Agent* find(const AgentId& id) const;

  void post(AgentId from, AgentId to, Message m);
  void post_all(const AgentId& from, Outbox& out);
  /// Delivers until no envelope is pending. Returns the number delivered.
  std::size_t run();
  bool idle() const { return pending_.empty(); }

  /// Envelopes addressed to External, in delivery order; cleared by take.
  std::vector<Envelope> take_external();
  /// Envelopes whose recipient did not exist at delivery time.
  const std::vector<Envelope>& undeliverable() const { return undeliverable_; }
  const std::vector<nlohmann::json>& trace() const { return trace_; }
  /// NDJSON of the trace.
  std::string trace_text() const;

 private:
  RuntimeOptions options_;
  std::mt19937_64 rng_;
  std::map<AgentId, std::shared_ptr<Agent>> agents_;
  std::deque<Envelope> pending_;
  std::vector<Envelope> external_;
  std::vector<Envelope> undeliverable_;
  std::vector<nlohmann::json> trace_;
  std::uint64_t next_seq_ = 1;
};

// ---------------------------------------------------------------------------
// CTS: one per product

/// Window profiles of one product for an analysis date, already joined with
/// the reference base.
using ProfileSource = std::function<std::vector<profiler::ClientProfile>(Date analysis_date)>;

class CaptureAgent : public Agent {
 public:
  CaptureAgent(std::string product, ProfileSource source,
               std::shared_ptr<const rules::RuleBank> bank,
               std::shared_ptr<const learner::ModelBundle> models);

  AgentId id() const override { return cts_id(product_); }
  void handle(const Envelope& e, Outbox& out) override;

  void set_bank(std::shared_ptr<const rules::RuleBank> bank) { bank_ = std::move(bank); }
  void set_models(std::shared_ptr<const learner::ModelBundle> m) { models_ = std::move(m); }

 private:
  ScanResult scan(const std::string& request_id, Date date, std::optional<double> mar,
                  const std::optional<std::string>& client_id,
                  const std::optional<Version>& pinned) const;

  std::string product_;
  ProfileSource source_;
  std::shared_ptr<const rules::RuleBank> bank_;
  std::shared_ptr<const learner::ModelBundle> models_;
};

// ---------------------------------------------------------------------------
// GCT: the only agent that knows which CTSs exist

/// client_id -> products the client holds.
using ClientDirectory = std::map<std::string, std::set<std::string>>;

class CaptureManager : public Agent {
 public:
  explicit CaptureManager(ClientDirectory directory);

  AgentId id() const override { return gct_id(); }
  void handle(const Envelope& e, Outbox& out) override;

  void add_product(const std::string& product);
  /// Pending requests stop waiting for the product; they complete with an
  /// error entry naming it.
  void remove_product(const std::string& product, Outbox& out);
  const std::set<std::string>& products() const { return products_; }
  void set_directory(ClientDirectory d) { directory_ = std::move(d); }

 private:
  struct Pending {
    AnalyzeRequest request;
    AgentId requester;
    std::set<std::string> primary;  // awaiting or answered full scans
    std::set<std::string> primary_done;
    std::set<std::pair<std::string, std::string>> fanned;  // (client, product)
    std::set<std::pair<std::string, std::string>> fanned_done;
    std::map<AccountKey, rules::Suspicion> found;
    std::size_t scanned = 0;
    std::map<ClientKind, rules::ClassCounts> phase1;
    std::vector<std::string> errors;
  };

  void start(const AnalyzeRequest& r, const AgentId& from, Outbox& out);
  void fan_out(Pending& p, const rules::Suspicion& s, const std::string& origin, Outbox& out);
  void on_result(const ScanResult& r, const AgentId& from, Outbox& out);
  void maybe_complete(const std::string& request_id, Outbox& out);

  ClientDirectory directory_;
  std::set<std::string> products_;
  std::map<std::string, Pending> pending_;
  std::set<std::string> completed_;
};

// ---------------------------------------------------------------------------
// APD

class DecisionAgent : public Agent {
 public:
  explicit DecisionAgent(std::shared_ptr<DecisionEngine> engine);

  AgentId id() const override { return apd_id(); }
  void handle(const Envelope& e, Outbox& out) override;
  const DecisionEngine& engine() const { return *engine_; }

 private:
  std::shared_ptr<DecisionEngine> engine_;
  std::set<std::string> seen_requests_;
};

// ---------------------------------------------------------------------------
// EBP

struct EvolutionInput {
  ClientKind segment = ClientKind::SingularPerson;
  std::vector<profiler::ClientProfile> reference;  // current base of the segment
  std::vector<profiler::ClientProfile> newer;      // newer cycle of the segment
};

class EvolutionAgent : public Agent {
 public:
  using Publish = std::function<void(std::shared_ptr<const learner::ModelBundle>)>;

  EvolutionAgent(std::shared_ptr<const learner::ModelBundle> models,
                 learner::EvolutionOptions options, Publish publish);

  AgentId id() const override { return ebp_id(); }
  void handle(const Envelope& e, Outbox& out) override;

  /// Compares the newer cycles and keeps the candidates until a validation
  /// closes the suggestion. An empty suggestion carries the reason in its
  /// note. Candidates a validation does not name count as rejected.
  ProfileSuggestion suggest(const std::vector<EvolutionInput>& inputs);
  std::shared_ptr<const learner::ModelBundle> models() const { return models_; }
  const std::map<std::string, ProfileSuggestion>& open_suggestions() const { return open_; }

 private:
  struct Held {
    ProfileCandidate candidate;
    learner::ProfileDiff diff;
  };
  std::shared_ptr<const learner::ModelBundle> models_;
  learner::EvolutionOptions options_;
  Publish publish_;
  std::map<std::string, ProfileSuggestion> open_;
  std::map<std::string, Held> held_;
  std::set<std::string> closed_;
  int next_suggestion_ = 1;
};

// ---------------------------------------------------------------------------
// Deployment

struct DeploymentOptions {
  RuntimeOptions runtime;
  MatrixOptions matrix;
  learner::EvolutionOptions evolution;
  std::optional<std::filesystem::path> decision_log;
  Clock clock;  // empty: system clock
};

/// Window profiles for every product; the deployment splits them per CTS.
using WindowSource = std::function<std::vector<profiler::ClientProfile>(Date analysis_date)>;

struct AnalysisOutcome {
  std::optional<AllScansComplete> complete;
  std::optional<RequestRejected> rejected;
  std::vector<DecisionOutcome> decisions;  // sorted by suspicion id
};

class Deployment {
 public:
  Deployment(DeploymentOptions options, std::shared_ptr<const rules::RuleBank> bank,
             std::shared_ptr<const learner::ModelBundle> models, WindowSource source,
             ClientDirectory directory);

  void add_product(const std::string& product);
  void remove_product(const std::string& product);
  std::vector<std::string> products() const;

  AnalysisOutcome analyze(const AnalyzeRequest& request);
  /// Analyst verdict through the APD. Same errors as DecisionEngine.
  DecisionOutcome verdict(const std::string& suspicion_id, Verdict v);

  ProfileSuggestion suggest_profiles(const std::vector<EvolutionInput>& inputs);
  /// Returns the bundle in force afterwards.
  std::shared_ptr<const learner::ModelBundle> validate_profiles(const ProfileValidation& v);
  std::vector<ProfileSuggestion> open_suggestions() const;

  void set_bank(std::shared_ptr<const rules::RuleBank> bank);
  std::shared_ptr<const learner::ModelBundle> models() const { return models_; }
  const DecisionEngine& decisions() const { return *engine_; }
  Runtime& runtime() { return runtime_; }

 private:
  std::vector<Envelope> pump();

  Runtime runtime_;
  std::shared_ptr<const rules::RuleBank> bank_;
  std::shared_ptr<const learner::ModelBundle> models_;
  WindowSource source_;
  std::shared_ptr<DecisionEngine> engine_;
  std::shared_ptr<CaptureManager> gct_;
  std::shared_ptr<EvolutionAgent> ebp_;
  std::map<std::string, std::shared_ptr<CaptureAgent>> cts_;
};

}  // namespace aml::agents
