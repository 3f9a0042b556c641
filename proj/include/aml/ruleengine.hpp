#pragma once

// Operational rule bank, effective limits under the additional risk margin
// (MAR), and the two capture phases: reclassification and rule evaluation.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aml/learner/pipeline.hpp"
#include "aml/profiler.hpp"

namespace aml::rules {

using profiler::Attribute;
using profiler::ClientProfile;

// ---------------------------------------------------------------------------
// Limits

using Limits = std::array<double, profiler::kAttributeCount>;

struct EffectiveLimits {
  ProfileClass profile_class = ProfileClass::Standard;
  std::optional<double> mar;  // empty: raw basis, no margin arithmetic
  Limits values{};

  double operator[](Attribute a) const { return values[static_cast<std::size_t>(a)]; }
};

/// Throws ConfigError unless 0 <= mar < 100.
void validate_mar(double mar);

/// Risk2/Risk3: monthly max shrunk by mar. Risk1: monthly max, never
/// shrunk. LowUsage/Standard: annual total shrunk by mar.
EffectiveLimits apply_mar(ProfileClass c, const ClientProfile& p, double mar);
/// The raw basis values with no margin applied.
EffectiveLimits baseline_limits(ProfileClass c, const ClientProfile& p);

// ---------------------------------------------------------------------------
// Predicates
//
//   expr    := conj ('OR' conj)*
//   conj    := atom ('AND' atom)*
//   atom    := '(' expr ')' | operand cmp operand
//   operand := factor ('*' factor)*      at most one reference per operand
//   factor  := number | ref
//   ref     := attr '.' field | 'sum(' attr (',' attr)* ').' field
//            | 'limit(' attr ')' | 'age'
//   field   := total | max | window
//   cmp     := '>=' | '>' | '<=' | '<'
//
// A comparison that mentions limit() must read `operand (>=|>) c*limit(a)`
// with c >= 0 and no limit() on the left, so tightening limits can only make
// it true more often.

enum class Field : std::uint8_t { Total, Max, Window };
enum class CmpOp : std::uint8_t { Ge, Gt, Le, Lt };

struct Reference {
  enum class Kind : std::uint8_t { Value, Sum, Limit, Age };
  Kind kind = Kind::Value;
  std::vector<Attribute> attrs;
  Field field = Field::Window;
};

struct Operand {
  double coefficient = 1;
  std::optional<Reference> ref;  // empty: constant `coefficient`
};

struct Comparison {
  Operand lhs;
  CmpOp op = CmpOp::Ge;
  Operand rhs;
};

struct EvalContext {
  const ClientProfile& profile;
  const EffectiveLimits& limits;
};

class Predicate {
 public:
  /// Throws ValidationError with the offending position on bad input.
  static Predicate parse(std::string_view text);

  bool evaluate(const EvalContext& ctx) const;
  /// Evaluated values of the comparisons that held, e.g.
  /// "movl.window=8 <= 0.05*movl.max=41.5".
  std::string explain(const EvalContext& ctx) const;

  const std::string& source() const { return source_; }
  /// Canonical rendering, stable under parse(to_string()).
  std::string to_string() const;
  bool uses_limits() const;

  struct Node {
    enum class Kind : std::uint8_t { And, Or, Leaf };
    Kind kind = Kind::Leaf;
    std::vector<Node> children;
    Comparison leaf;
  };

 private:
  std::string source_;
  Node root_;
};

std::string to_string(const Operand& o);
double evaluate(const Operand& o, const EvalContext& ctx);

// ---------------------------------------------------------------------------
// Rules and the bank

enum class RuleFamily : std::uint8_t { Normative, ProfileBased };

struct OperationalRule {
  std::string id;  // [BP]CXX<yyyy><nnn>
  Version version;
  std::vector<ProfileClass> classes;  // sorted; normative rules hold all five
  Predicate predicate;
  std::string text;
  std::string citation;  // may be empty

  RuleFamily family() const { return id.front() == 'B' ? RuleFamily::Normative : RuleFamily::ProfileBased; }
  bool applies_to(ProfileClass c) const;
};

bool valid_rule_id(std::string_view id);

struct RuleBank {
  Version version;
  std::vector<OperationalRule> normative;
  std::vector<OperationalRule> profile_based;

  std::size_t size() const { return normative.size() + profile_based.size(); }
  const OperationalRule* find(std::string_view id) const;
};

/// `id|version|classes|predicate|text|citation` per line; '#' starts a
/// comment line; classes is `*` or a comma list of class names. Every rule
/// must carry the same version. Throws ValidationError naming the line.
RuleBank parse_bank(std::istream& in);
void write_bank(std::ostream& out, const RuleBank& bank);
RuleBank load_bank(const std::filesystem::path& file);

/// Five normative rules and twenty profile rules, version 02032017.01.
RuleBank builtin_bank();

struct BeliefCount {
  std::size_t normative = 0;
  std::size_t profile_based = 0;
  std::size_t learned_singular = 0;
  std::size_t learned_entity = 0;

  std::size_t total() const { return normative + profile_based + learned_singular + learned_entity; }
};
BeliefCount count_beliefs(const RuleBank& bank, const learner::ModelBundle& models);

/// Directory of `*.rules` files, one bank version per file. A capture pins
/// the shared pointer it obtained; refresh() picks up new or changed files
/// without disturbing banks already handed out.
class BankRegistry {
 public:
  explicit BankRegistry(std::filesystem::path dir);

  /// Rescans the directory. Returns true if anything changed. Files that
  /// fail validation are reported in errors() and skipped.
  bool refresh();
  std::shared_ptr<const RuleBank> latest() const;
  std::shared_ptr<const RuleBank> get(const Version& v) const;
  std::vector<Version> versions() const;
  std::vector<std::string> errors() const;

 private:
  struct Entry {
    std::filesystem::file_time_type mtime;
    std::uintmax_t size = 0;
    std::shared_ptr<const RuleBank> bank;
  };
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::filesystem::path, Entry> files_;
  std::vector<std::string> errors_;
};

// ---------------------------------------------------------------------------
// Capture

/// Class of a profile under a segment model: its training assignment when
/// known, otherwise the nearest centroid.
ProfileClass original_class(const ClientProfile& p, const learner::SegmentModel& model);

/// Phase 1 for one profile. Never changes the stored class.
ProfileClass reclassify(const ClientProfile& p, ProfileClass original,
                        const learner::SegmentModel& model);

struct RuleMatch {
  std::string rule_id;
  std::string detail;

  friend bool operator==(const RuleMatch&, const RuleMatch&) = default;
};

struct Suspicion {
  AccountKey key;
  ClientKind client_kind = ClientKind::SingularPerson;
  ProfileClass analysis_class = ProfileClass::Standard;
  ProfileClass original_class = ProfileClass::Standard;
  std::vector<RuleMatch> triggered;  // bank order: normative then profile
  ClientProfile profile;
  Date analysis_date{};
  std::optional<double> mar;

  /// Stable identifier "<date>/<client>/<agency>/<account>".
  std::string id() const;
  friend bool operator==(const Suspicion&, const Suspicion&) = default;
};

struct ClassCounts {
  std::array<std::size_t, 5> original{};
  std::array<std::size_t, 5> adjusted{};

  long long delta(ProfileClass c) const {
    auto i = static_cast<std::size_t>(c);
    return static_cast<long long>(adjusted[i]) - static_cast<long long>(original[i]);
  }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct CaptureOptions {
  Date analysis_date{};
  std::optional<double> mar = 0.0;  // empty: no-margin baseline
};

struct CaptureResult {
  std::map<ClientKind, ClassCounts> phase1;
  std::vector<Suspicion> suspicions;  // sorted by key
  std::size_t analyzed = 0;
};

/// Runs both phases over joined window profiles. Throws NotFoundError when a
/// profile's segment has no model.
CaptureResult capture(std::span<const ClientProfile> window_profiles, const RuleBank& bank,
                      const learner::ModelBundle& models, const CaptureOptions& options);

/// Evaluates the bank against one profile already classified.
std::vector<RuleMatch> evaluate_rules(const ClientProfile& p, ProfileClass analysis_class,
                                      const RuleBank& bank, std::optional<double> mar);

}  // namespace aml::rules
