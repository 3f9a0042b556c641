#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "aml/ruleengine.hpp"

namespace aml::rules {

void validate_mar(double mar) {
  if (!(mar >= 0.0 && mar < 100.0))
    throw ConfigError("MAR must be in [0, 100), got " + format_double(mar));
}

EffectiveLimits apply_mar(ProfileClass c, const ClientProfile& p, double mar) {
  validate_mar(mar);
  EffectiveLimits l = baseline_limits(c, p);
  l.mar = mar;
  if (c == ProfileClass::Risk1) return l;
  const double keep = 1.0 - mar / 100.0;
  for (auto& v : l.values) v *= keep;
  return l;
}

EffectiveLimits baseline_limits(ProfileClass c, const ClientProfile& p) {
  EffectiveLimits l;
  l.profile_class = c;
  l.mar.reset();
  const bool annual = limit_basis(c) == LimitBasis::AnnualTotal;
  for (std::size_t a = 0; a < profiler::kAttributeCount; ++a)
    l.values[a] = annual ? p.attrs[a].annual_total : p.attrs[a].monthly_max;
  return l;
}

bool OperationalRule::applies_to(ProfileClass c) const {
  return family() == RuleFamily::Normative ||
         std::find(classes.begin(), classes.end(), c) != classes.end();
}

bool valid_rule_id(std::string_view id) {
  static const std::regex re("[BP]CXX\\d{4}\\d{3}");
  return std::regex_match(id.begin(), id.end(), re);
}

const OperationalRule* RuleBank::find(std::string_view id) const {
  for (const auto* group : {&normative, &profile_based})
    for (const auto& r : *group)
      if (r.id == id) return &r;
  return nullptr;
}

namespace {

std::string classes_field(const OperationalRule& r) {
  if (r.family() == RuleFamily::Normative || r.classes.size() == std::size(kAllClasses)) return "*";
  std::string s;
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    if (i) s += ',';
    s += to_string(r.classes[i]);
  }
  return s;
}

std::vector<ProfileClass> parse_classes(std::string_view text) {
  std::vector<ProfileClass> out;
  if (trim(text) == "*") return {std::begin(kAllClasses), std::end(kAllClasses)};
  for (auto part : split(text, ',')) {
    auto c = parse_profile_class(trim(part));
    if (!c) throw ValidationError("unknown class '" + std::string(trim(part)) + "'");
    out.push_back(*c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ValidationError("rule applies to no class");
  return out;
}

}  // namespace

RuleBank parse_bank(std::istream& in) {
  RuleBank bank;
  bool have_version = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto where = [&] { return "rule bank line " + std::to_string(lineno) + ": "; };
    auto cols = split(t, '|');
    if (cols.size() != 6) throw ValidationError(where() + "expected 6 fields");
    OperationalRule r;
    r.id = std::string(trim(cols[0]));
    if (!valid_rule_id(r.id)) throw ValidationError(where() + "bad rule id '" + r.id + "'");
    auto v = Version::parse(trim(cols[1]));
    if (!v) throw ValidationError(where() + "bad version");
    r.version = *v;
    try {
      r.classes = parse_classes(cols[2]);
      r.predicate = Predicate::parse(cols[3]);
    } catch (const ValidationError& e) {
      throw ValidationError(where() + e.what());
    }
    r.text = std::string(trim(cols[4]));
    r.citation = std::string(trim(cols[5]));
    if (!have_version) {
      bank.version = r.version;
      have_version = true;
    } else if (!(bank.version == r.version)) {
      throw ValidationError(where() + "version differs from the bank's " + bank.version.to_string());
    }
    if (bank.find(r.id)) throw ValidationError(where() + "duplicate rule id " + r.id);
    (r.family() == RuleFamily::Normative ? bank.normative : bank.profile_based).push_back(std::move(r));
  }
  if (!have_version) throw ValidationError("rule bank is empty");
  return bank;
}

void write_bank(std::ostream& out, const RuleBank& bank) {
  out << "# id|version|classes|predicate|text|citation\n";
  for (const auto* group : {&bank.normative, &bank.profile_based})
    for (const auto& r : *group)
      out << r.id << '|' << r.version.to_string() << '|' << classes_field(r) << '|'
          << r.predicate.to_string() << '|' << r.text << '|' << r.citation << '\n';
}

RuleBank load_bank(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open rule bank " + file.string());
  try {
    return parse_bank(in);
  } catch (const ValidationError& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
}

RuleBank builtin_bank() {
  static const char* const kText = R"(# Normative rules apply to every class.
BCXX2016001|02032017.01|*|fxlvr6.window >= 5 AND fxlvr6.window >= 0.8*movl.window AND fxlvr6.window > 3*limit(fxlvr6)|Repetição de movimentos de mesma faixa de valor elevado|CC.3542.1.I.b
BCXX2016002|02032017.01|*|fxlvr5.window >= 3 AND fxlvr5.window >= 0.5*movl.window AND fxlvr5.window > 2*limit(fxlvr5)|Fracionamento de valores logo abaixo do limite de comunicação|CC.3542.1.I.a
BCXX2016003|02032017.01|*|movl.max >= 10 AND movl.window <= 0.1*movl.max|Redução brusca do número de movimentos em conta de uso intenso|CC.3542.1.IV.f
BCXX2016004|02032017.01|*|pctdeb.window >= 95 AND pctdeb.window <= 105 AND pctted.window >= 95 AND pctted.total < 50 AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 2 AND movl.window >= 4|Saída integral de créditos elevados para outras instituições|CC.3542.1.III.b
BCXX2016005|02032017.01|*|movl.window > limit(movl) AND movl.window >= 10 AND movl.max <= 5|Surto de movimentação em conta habitualmente inativa|CC.3542.1.II.c
# Profile rules compare the window against the class limits.
PCXX2016001|02032017.01|LowUsage,Standard|movl.window > limit(movl) AND movl.window >= 6|Movimentos no mês acima do total anual|
PCXX2016002|02032017.01|LowUsage,Standard|serv.window > limit(serv) AND serv.window >= 4|Serviços utilizados no mês acima do total anual|
PCXX2016003|02032017.01|LowUsage,Standard|fxlvr4.window > limit(fxlvr4) AND fxlvr4.window >= 3|Fxlvr4 no mês acima do total anual|
PCXX2016004|02032017.01|LowUsage,Standard|fxlvr5.window > limit(fxlvr5) AND fxlvr5.window >= 3|Fxlvr5 no mês acima do total anual|
PCXX2016005|02032017.01|LowUsage,Standard|fxlvr6.window > limit(fxlvr6) AND fxlvr6.window >= 2|Fxlvr6 no mês acima do total anual|
PCXX2016006|02032017.01|Risk1,Risk2|pctted.window > limit(pctted) AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 0.9*movl.window AND movl.window >= 2|PctTED acima do limite mensal com Fxlvr4-6 em ao menos 90% dos movimentos (riscos 1 e 2)|
PCXX2016007|02032017.01|Risk1,Risk2,Risk3|movl.window > 2*limit(movl) AND movl.window >= 10|Movimentos no mês acima do dobro do limite mensal (perfis de risco)|
PCXX2016008|02032017.01|Risk1,Risk2,Risk3|serv.window > 2*limit(serv) AND serv.window >= 6|Serviços no mês acima do dobro do limite mensal (perfis de risco)|
PCXX2016009|02032017.01|Risk1,Risk2,Risk3|fxlvr4.window > 2*limit(fxlvr4) AND fxlvr4.window >= 4|Fxlvr4 acima do dobro do limite mensal (perfis de risco)|
PCXX2016010|02032017.01|Risk1,Risk2,Risk3|fxlvr5.window > 2*limit(fxlvr5) AND fxlvr5.window >= 4|Fxlvr5 acima do dobro do limite mensal (perfis de risco)|
PCXX2016011|02032017.01|Risk1,Risk2,Risk3|fxlvr6.window > 2*limit(fxlvr6) AND fxlvr6.window >= 3|Fxlvr6 acima do dobro do limite mensal (perfis de risco)|
PCXX2016012|02032017.01|LowUsage,Standard|pctted.window > 2*limit(pctted) AND pctted.window >= 80 AND pctted.max < 80 AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 2|PctTED acima do dobro do percentual anual e inédito no perfil, com valores elevados|
PCXX2016013|02032017.01|LowUsage,Standard|pctdoc.window > 2*limit(pctdoc) AND pctdoc.window >= 80 AND pctdoc.max < 80 AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 2|PctDOC acima do dobro do percentual anual e inédito no perfil, com valores elevados|
PCXX2016014|02032017.01|Risk1,Risk2,Risk3|pctdoc.window > 1.5*limit(pctdoc) AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 3|PctDOC acima de 1,5 vez o limite mensal (perfis de risco)|
PCXX2016015|02032017.01|Risk1,Risk2,Risk3|pctdeb.window > 3*limit(pctdeb) AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 3 AND movl.window >= 4|PctDEB acima do triplo do limite mensal (perfis de risco)|
PCXX2016016|02032017.01|LowUsage,Standard|pctdeb.window > 3*limit(pctdeb) AND pctdeb.window >= 300 AND pctdeb.max < 300 AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 1|PctDEB acima do triplo do percentual anual e inédito no perfil|
PCXX2016017|02032017.01|Risk1|movl.window > 1.5*limit(movl) AND sum(fxlvr4,fxlvr5,fxlvr6).window >= 0.5*movl.window AND movl.window >= 8|Perfil de alerta com aumento de movimentos de valor elevado|
PCXX2016018|02032017.01|Risk2|fxlvr5.window > 1.5*limit(fxlvr5) AND fxlvr5.window >= 0.8*movl.window AND fxlvr5.window >= 4|Concentração crescente em Fxlvr5 (risco médio)|
PCXX2016019|02032017.01|Risk3|fxlvr6.window > 1.5*limit(fxlvr6) AND pctted.window >= 95 AND fxlvr6.window >= 3|Fxlvr6 crescente com saída por TED (alto risco)|
PCXX2016020|02032017.01|LowUsage,Standard|movl.window > 0.5*limit(movl) AND sum(fxlvr5,fxlvr6).window >= 3|Movimentos de valor elevado acima da metade do total anual|
)";
  std::istringstream in(kText);
  return parse_bank(in);
}

BeliefCount count_beliefs(const RuleBank& bank, const learner::ModelBundle& models) {
  BeliefCount b;
  b.normative = bank.normative.size();
  b.profile_based = bank.profile_based.size();
  if (auto it = models.segments.find(ClientKind::SingularPerson); it != models.segments.end())
    b.learned_singular = it->second.rules.rules.size();
  if (auto it = models.segments.find(ClientKind::LegalEntity); it != models.segments.end())
    b.learned_entity = it->second.rules.rules.size();
  return b;
}

// ---------------------------------------------------------------------------

BankRegistry::BankRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {}

bool BankRegistry::refresh() {
  namespace fs = std::filesystem;
  std::lock_guard lock(mu_);
  errors_.clear();
  bool changed = false;
  std::error_code ec;
  if (!fs::is_directory(dir_, ec)) throw IoError("rule bank directory missing: " + dir_.string());
  std::map<fs::path, Entry> seen;
  for (const auto& de : fs::directory_iterator(dir_)) {
    if (!de.is_regular_file() || de.path().extension() != ".rules") continue;
    const auto mtime = de.last_write_time();
    const auto size = de.file_size();
    auto old = files_.find(de.path());
    if (old != files_.end() && old->second.mtime == mtime && old->second.size == size) {
      seen.emplace(de.path(), old->second);
      continue;
    }
    try {
      Entry e{mtime, size, std::make_shared<const RuleBank>(load_bank(de.path()))};
      seen.emplace(de.path(), std::move(e));
      changed = true;
    } catch (const Error& e) {
      errors_.emplace_back(e.what());
      if (old != files_.end()) seen.emplace(de.path(), old->second);
    }
  }
  if (seen.size() != files_.size()) changed = true;
  files_ = std::move(seen);
  return changed;
}

std::shared_ptr<const RuleBank> BankRegistry::latest() const {
  std::lock_guard lock(mu_);
  std::shared_ptr<const RuleBank> best;
  for (const auto& [_, e] : files_)
    if (!best || best->version < e.bank->version) best = e.bank;
  if (!best) throw NotFoundError("no rule bank in " + dir_.string());
  return best;
}

std::shared_ptr<const RuleBank> BankRegistry::get(const Version& v) const {
  std::lock_guard lock(mu_);
  for (const auto& [_, e] : files_)
    if (e.bank->version == v) return e.bank;
  throw NotFoundError("rule bank version " + v.to_string() + " not loaded");
}

std::vector<Version> BankRegistry::versions() const {
  std::lock_guard lock(mu_);
  std::vector<Version> out;
  for (const auto& [_, e] : files_) out.push_back(e.bank->version);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> BankRegistry::errors() const {
  std::lock_guard lock(mu_);
  return errors_;
}

}  // namespace aml::rules
