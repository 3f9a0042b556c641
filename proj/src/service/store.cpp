#include "aml/service/store.hpp"

#include <cstdio>
#include <fstream>

#include "aml/serialize.hpp"

namespace aml::service {

using nlohmann::json;

std::string run_id(Date analysis_date, std::optional<double> mar, const std::string& product,
                   const std::optional<std::string>& client_id, const Version& bank,
                   const Version& models) {
  std::string d = format_date(analysis_date);
  std::erase(d, '-');
  std::string m = mar ? "mar" + short_decimal(*mar) : std::string("base");
  std::string scope = product == agents::kAllProducts ? std::string("all") : product;
  if (client_id) scope += "-" + *client_id;
  return d + "-" + m + "-" + scope + "-b" + bank.to_string() + "-m" + models.to_string();
}

namespace {

json phase1_json(const std::map<ClientKind, rules::ClassCounts>& p) {
  json j = json::object();
  for (const auto& [k, c] : p) j[std::string(to_string(k))] = c;
  return j;
}

json outcome_json(const agents::DecisionOutcome& d) {
  return {{"suspicion_id", d.suspicion_id},
          {"verdict", agents::to_string(d.verdict)},
          {"source", agents::to_string(d.source)},
          {"matrix_key", d.matrix_key},
          {"request_id", d.request_id}};
}

agents::DecisionOutcome outcome_of(const json& j) {
  auto v = agents::parse_verdict(j.at("verdict").get<std::string>());
  auto s = agents::parse_source(j.at("source").get<std::string>());
  if (!v || !s) throw ValidationError("bad verdict in stored run");
  return {j.at("suspicion_id").get<std::string>(), *v, *s, j.at("matrix_key").get<std::string>(),
          j.at("request_id").get<std::string>()};
}

}  // namespace

json to_json(const AnalysisRun& r) {
  json segs = json::object();
  for (const auto& [k, s] : r.segments)
    segs[std::string(to_string(k))] = {{"learned_rules", s.learned_rules},
                                       {"model_version", s.model_version.to_string()}};
  json verdicts = json::array();
  for (const auto& d : r.agent_verdicts) verdicts.push_back(outcome_json(d));
  json texts = json::object();
  for (const auto& [id, t] : r.rule_texts) texts[id] = {{"text", t.text}, {"citation", t.citation}};
  return json{{"id", r.id},
              {"analysis_date", format_date(r.analysis_date)},
              {"mar", r.mar ? json(*r.mar) : json(nullptr)},
              {"product", r.product},
              {"client_id", r.client_id ? json(*r.client_id) : json(nullptr)},
              {"bank_version", r.bank_version.to_string()},
              {"normative_rules", r.normative_rules},
              {"profile_rules", r.profile_rules},
              {"model_version", r.model_version.to_string()},
              {"segments", std::move(segs)},
              {"analyzed", r.analyzed},
              {"phase1", phase1_json(r.phase1)},
              {"suspicions", r.suspicions},
              {"agent_verdicts", std::move(verdicts)},
              {"by_rule", r.by_rule},
              {"rule_texts", std::move(texts)},
              {"errors", r.errors},
              {"started_at", r.started_at},
              {"captured_at", r.captured_at},
              {"analysis_started_at", r.analysis_started_at},
              {"finished_at", r.finished_at}};
}

AnalysisRun run_from_json(const json& j) {
  AnalysisRun r;
  r.id = j.at("id").get<std::string>();
  r.analysis_date = date_from_json(j.at("analysis_date"));
  r.mar = j.at("mar").is_null() ? std::nullopt : std::optional<double>(j.at("mar").get<double>());
  r.product = j.at("product").get<std::string>();
  if (!j.at("client_id").is_null()) r.client_id = j.at("client_id").get<std::string>();
  r.bank_version = j.at("bank_version").get<Version>();
  r.normative_rules = j.at("normative_rules").get<std::size_t>();
  r.profile_rules = j.at("profile_rules").get<std::size_t>();
  r.model_version = j.at("model_version").get<Version>();
  for (const auto& [k, v] : j.at("segments").items())
    r.segments[kind_from_json(json(k))] = {v.at("learned_rules").get<std::size_t>(),
                                           v.at("model_version").get<Version>()};
  r.analyzed = j.at("analyzed").get<std::size_t>();
  for (const auto& [k, v] : j.at("phase1").items())
    r.phase1[kind_from_json(json(k))] = v.get<rules::ClassCounts>();
  r.suspicions = j.at("suspicions").get<std::vector<rules::Suspicion>>();
  for (const auto& v : j.at("agent_verdicts")) r.agent_verdicts.push_back(outcome_of(v));
  r.by_rule = j.at("by_rule").get<std::map<std::string, std::vector<std::size_t>>>();
  for (const auto& [id, t] : j.at("rule_texts").items())
    r.rule_texts[id] = {t.at("text").get<std::string>(), t.at("citation").get<std::string>()};
  r.errors = j.at("errors").get<std::vector<std::string>>();
  r.started_at = j.at("started_at").get<std::string>();
  r.captured_at = j.at("captured_at").get<std::string>();
  r.analysis_started_at = j.at("analysis_started_at").get<std::string>();
  r.finished_at = j.at("finished_at").get<std::string>();
  if (r.agent_verdicts.size() != r.suspicions.size())
    throw ValidationError("run " + r.id + ": one agent verdict per suspicion expected");
  return r;
}

RunStore::RunStore(std::filesystem::path file) : file_(std::move(file)) {
  if (!std::filesystem::exists(file_)) return;
  std::ifstream in(file_);
  if (!in) throw IoError("cannot read " + file_.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      auto run = run_from_json(json::parse(line));
      if (!runs_.count(run.id)) order_.push_back(run.id);
      runs_[run.id] = std::move(run);
    } catch (const json::exception& e) {
      throw ValidationError(file_.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunStore::put(const AnalysisRun& run) {
  std::lock_guard lock(mu_);
  if (runs_.count(run.id)) throw ConflictError("run " + run.id + " already stored");
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  std::ofstream out(file_, std::ios::app);
  if (!out) throw IoError("cannot append to " + file_.string());
  out << to_json(run).dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed on " + file_.string());
  runs_[run.id] = run;
  order_.push_back(run.id);
}

std::optional<AnalysisRun> RunStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = runs_.find(id);
  if (it == runs_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> RunStore::ids() const {
  std::lock_guard lock(mu_);
  return order_;
}

}  // namespace aml::service
