#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aml/ruleengine.hpp"

namespace aml::agents {

enum class Role : std::uint8_t { CTS, GCT, APD, EBP, External };

struct AgentId {
  Role role = Role::External;
  std::string product;  // CTS only

  std::string to_string() const;
  static std::optional<AgentId> parse(std::string_view s);
  friend auto operator<=>(const AgentId&, const AgentId&) = default;
};

inline AgentId gct_id() { return {Role::GCT, {}}; }
inline AgentId apd_id() { return {Role::APD, {}}; }
inline AgentId ebp_id() { return {Role::EBP, {}}; }
inline AgentId external_id() { return {Role::External, {}}; }
inline AgentId cts_id(std::string product) { return {Role::CTS, std::move(product)}; }

enum class ScanMode : std::uint8_t { ByTransaction, ByClient };
enum class Verdict : std::uint8_t { Confirmed, Rejected, Escalated };
enum class Source : std::uint8_t { Agent, Analyst };

std::string_view to_string(ScanMode m);
std::string_view to_string(Verdict v);
std::string_view to_string(Source s);
std::optional<Verdict> parse_verdict(std::string_view s);
std::optional<Source> parse_source(std::string_view s);

/// Product "*" asks every CTS.
inline constexpr std::string_view kAllProducts = "*";

struct AnalyzeRequest {
  std::string request_id;
  ScanMode mode = ScanMode::ByTransaction;
  Date analysis_date{};
  std::optional<double> mar = 0.0;
  std::string product{kAllProducts};
  std::optional<std::string> client_id;  // ByClient
  std::optional<Version> bank_version;   // pin; empty accepts the CTS's bank
};

struct ScanResult {
  std::string request_id;
  std::string product;
  std::optional<std::string> client_id;  // set when answering a ClientScanRequest
  std::vector<rules::Suspicion> suspicions;
  std::size_t scanned = 0;
  std::map<ClientKind, rules::ClassCounts> phase1;
  std::optional<std::string> error;
};

struct SuspicionFound {
  std::string request_id;
  std::string product;
  rules::Suspicion suspicion;
};

struct ClientScanRequest {
  std::string request_id;
  std::string client_id;
  std::string product;         // target CTS
  std::string origin_product;  // CTS that found the suspicion
  Date analysis_date{};
  std::optional<double> mar = 0.0;
  std::optional<Version> bank_version;
};

struct AllScansComplete {
  std::string request_id;
  std::vector<rules::Suspicion> suspicions;  // unique per account, sorted
  std::size_t scanned = 0;
  std::map<ClientKind, rules::ClassCounts> phase1;
  std::vector<std::string> products;  // primary scans, sorted
  std::vector<std::string> errors;
};

struct RequestRejected {
  std::string request_id;
  std::string reason;
};

struct DecisionOutcome {
  std::string suspicion_id;
  Verdict verdict = Verdict::Escalated;
  Source source = Source::Agent;
  std::string matrix_key;  // filled by APD
  std::string request_id;  // run correlation, may be empty

  friend bool operator==(const DecisionOutcome&, const DecisionOutcome&) = default;
};

/// A behavior group observed in a newer cycle that the current base lacks,
/// or a current centroid that moved.
struct ProfileCandidate {
  enum class Kind : std::uint8_t { NewProfile, Shifted };
  std::string id;
  Kind kind = Kind::NewProfile;
  ClientKind segment = ClientKind::SingularPerson;
  int cluster = -1;                    // Shifted: the moved cluster
  std::vector<double> centroid;        // standardized feature space
  std::vector<double> raw_centroid;    // feature units
  std::size_t support = 0;             // profiles behind the candidate
  double distance = 0;                 // shift, or distance to nearest centroid
  ProfileClass proposed_class = ProfileClass::Risk1;

  friend bool operator==(const ProfileCandidate&, const ProfileCandidate&) = default;
};

struct ProfileSuggestion {
  std::string suggestion_id;
  std::vector<ProfileCandidate> candidates;
  std::string note;
};

struct ProfileValidation {
  std::string suggestion_id;
  std::vector<std::string> accepted;
  std::vector<std::string> rejected;
};

using Message = std::variant<AnalyzeRequest, ScanResult, SuspicionFound, ClientScanRequest,
                             AllScansComplete, RequestRejected, DecisionOutcome, ProfileSuggestion,
                             ProfileValidation>;

std::string_view message_type(const Message& m);

struct Envelope {
  AgentId from;
  AgentId to;
  Message message;
  std::uint64_t sequence = 0;  // assigned by the runtime at post time
};

/// One JSON object per envelope, for trace capture and replay.
nlohmann::json to_json(const Envelope& e);
Envelope envelope_from_json(const nlohmann::json& j);
nlohmann::json message_to_json(const Message& m);
Message message_from_json(const nlohmann::json& j);

}  // namespace aml::agents
