#include "aml/agents/decision.hpp"

#include <algorithm>
#include <fstream>

namespace aml::agents {

using nlohmann::json;

char ratio_bucket(double window_value, double monthly_max) {
  if (window_value <= 0) return '0';
  if (monthly_max <= 0) return '3';
  const double r = window_value / monthly_max;
  if (r <= 0.5) return '1';
  if (r <= 1.0) return '2';
  return '3';
}

std::string attribute_signature(const profiler::ClientProfile& p) {
  std::string sig;
  for (const auto& t : p.attrs) sig.push_back(ratio_bucket(t.window_value, t.monthly_max));
  return sig;
}

std::string matrix_key(const rules::Suspicion& s) {
  std::vector<std::string> ids;
  for (const auto& m : s.triggered) ids.push_back(m.rule_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::string key;
  for (const auto& id : ids) {
    if (!key.empty()) key += ',';
    key += id;
  }
  key += '|';
  key += to_string(s.analysis_class);
  key += '|';
  key += attribute_signature(s.profile);
  return key;
}

DecisionMatrix::DecisionMatrix(MatrixOptions options) : options_(options) {}

Verdict DecisionMatrix::decide(const std::string& key) const {
  const MatrixCell* c = cell(key);
  if (!c || c->support() == 0 || c->support() < options_.min_support) return Verdict::Escalated;
  const double n = static_cast<double>(c->support());
  if (static_cast<double>(c->confirmed) / n >= options_.threshold) return Verdict::Confirmed;
  if (static_cast<double>(c->rejected) / n >= options_.threshold) return Verdict::Rejected;
  return Verdict::Escalated;
}

const MatrixCell* DecisionMatrix::cell(const std::string& key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

void DecisionMatrix::apply(const MatrixProposal& p) {
  if (p.key.empty()) throw ValidationError("matrix proposal without key");
  if (p.empty()) return;
  auto& c = cells_[p.key];
  c.confirmed += p.add_confirmed;
  c.rejected += p.add_rejected;
}

json DecisionMatrix::to_json() const {
  json cells = json::object();
  for (const auto& [k, c] : cells_) cells[k] = {{"confirmed", c.confirmed}, {"rejected", c.rejected}};
  return json{{"threshold", options_.threshold},
              {"min_support", options_.min_support},
              {"cells", std::move(cells)}};
}

std::string DecisionMatrix::canonical() const { return to_json().dump(); }

json to_json(const DecisionRecord& r) {
  return json{{"seq", r.seq},
              {"at", r.at},
              {"suspicion_id", r.suspicion_id},
              {"matrix_key", r.matrix_key},
              {"verdict", to_string(r.verdict)},
              {"source", to_string(r.source)},
              {"request_id", r.request_id}};
}

DecisionRecord record_from_json(const json& j) {
  DecisionRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.at = j.at("at").get<std::string>();
  r.suspicion_id = j.at("suspicion_id").get<std::string>();
  r.matrix_key = j.at("matrix_key").get<std::string>();
  auto v = parse_verdict(j.at("verdict").get<std::string>());
  auto s = parse_source(j.at("source").get<std::string>());
  if (!v || !s) throw ValidationError("bad decision record " + j.dump());
  r.verdict = *v;
  r.source = *s;
  r.request_id = j.at("request_id").get<std::string>();
  return r;
}

void validate(const DecisionRecord& r) {
  if (r.suspicion_id.empty()) throw ValidationError("decision record without suspicion id");
  if (std::count(r.matrix_key.begin(), r.matrix_key.end(), '|') != 2)
    throw ValidationError("bad matrix key '" + r.matrix_key + "'");
  if (r.source == Source::Analyst && r.verdict == Verdict::Escalated)
    throw ValidationError("an analyst verdict must confirm or reject");
}

MatrixProposal learn(const DecisionRecord& r) {
  MatrixProposal p{r.matrix_key, 0, 0};
  if (r.source != Source::Analyst) return p;
  if (r.verdict == Verdict::Confirmed) p.add_confirmed = 1;
  if (r.verdict == Verdict::Rejected) p.add_rejected = 1;
  return p;
}

DecisionMatrix replay(const std::vector<DecisionRecord>& log, MatrixOptions options) {
  DecisionMatrix m(options);
  for (const auto& r : log) {
    validate(r);
    m.apply(learn(r));
  }
  return m;
}

std::vector<DecisionRecord> read_decision_log(const std::filesystem::path& file) {
  std::vector<DecisionRecord> out;
  if (!std::filesystem::exists(file)) return out;
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(file.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void append_decision_log(const std::filesystem::path& file, const DecisionRecord& r) {
  std::ofstream out(file, std::ios::app);
  if (!out) throw IoError("cannot append to " + file.string());
  out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed on " + file.string());
}

std::string system_clock_now() {
  auto now = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  return format_timestamp(now);
}

DecisionEngine::DecisionEngine(MatrixOptions options, Clock clock,
                               std::optional<std::filesystem::path> log_file)
    : matrix_(options), clock_(clock ? std::move(clock) : Clock(system_clock_now)),
      log_file_(std::move(log_file)) {
  if (log_file_) log_ = read_decision_log(*log_file_);
  for (const auto& r : log_) {
    validate(r);
    matrix_.apply(learn(r));
    auto& c = cases_[r.suspicion_id];
    c.matrix_key = r.matrix_key;
    c.request_id = r.request_id;
    c.verdict = r.verdict;
    if (r.source == Source::Analyst)
      c.state = CaseState::AnalystDecided;
    else
      c.state = r.verdict == Verdict::Escalated ? CaseState::Escalated : CaseState::AgentDecided;
  }
}

DecisionRecord DecisionEngine::append(std::string suspicion_id, std::string key, Verdict v,
                                      Source s, std::string request_id) {
  DecisionRecord r;
  r.seq = log_.empty() ? 1 : log_.back().seq + 1;
  r.at = clock_();
  r.suspicion_id = std::move(suspicion_id);
  r.matrix_key = std::move(key);
  r.verdict = v;
  r.source = s;
  r.request_id = std::move(request_id);
  validate(r);
  if (log_file_) append_decision_log(*log_file_, r);
  log_.push_back(r);
  matrix_.apply(learn(r));
  return r;
}

DecisionOutcome DecisionEngine::assess(const rules::Suspicion& s, const std::string& request_id) {
  const std::string id = s.id();
  const std::string key = matrix_key(s);
  auto it = cases_.find(id);
  if (it != cases_.end() && it->second.state == CaseState::AnalystDecided)
    return {id, it->second.verdict, Source::Analyst, it->second.matrix_key, request_id};
  if (it != cases_.end() && it->second.state == CaseState::Escalated)
    return {id, Verdict::Escalated, Source::Agent, it->second.matrix_key, request_id};
  const Verdict v = matrix_.decide(key);
  append(id, key, v, Source::Agent, request_id);
  cases_[id] = {v == Verdict::Escalated ? CaseState::Escalated : CaseState::AgentDecided, v, key,
                request_id};
  return {id, v, Source::Agent, key, request_id};
}

void DecisionEngine::check_analyst(const std::string& suspicion_id, Verdict verdict) const {
  if (verdict == Verdict::Escalated) throw ValidationError("an analyst verdict must confirm or reject");
  auto it = cases_.find(suspicion_id);
  if (it == cases_.end()) throw NotFoundError("unknown suspicion " + suspicion_id);
  switch (it->second.state) {
    case CaseState::Escalated: return;
    case CaseState::AnalystDecided:
      throw ConflictError("suspicion " + suspicion_id + " already has an analyst verdict");
    case CaseState::AgentDecided:
      throw ConflictError("suspicion " + suspicion_id + " was decided by the agent");
  }
}

DecisionOutcome DecisionEngine::record_analyst(const std::string& suspicion_id, Verdict verdict) {
  check_analyst(suspicion_id, verdict);
  auto& c = cases_.at(suspicion_id);
  append(suspicion_id, c.matrix_key, verdict, Source::Analyst, c.request_id);
  c.state = CaseState::AnalystDecided;
  c.verdict = verdict;
  return {suspicion_id, verdict, Source::Analyst, c.matrix_key, c.request_id};
}

const CaseStatus* DecisionEngine::status(const std::string& suspicion_id) const {
  auto it = cases_.find(suspicion_id);
  return it == cases_.end() ? nullptr : &it->second;
}

std::vector<std::string> DecisionEngine::pending() const {
  std::vector<std::string> out;
  for (const auto& [id, c] : cases_)
    if (c.state == CaseState::Escalated) out.push_back(id);
  return out;
}

}  // namespace aml::agents
