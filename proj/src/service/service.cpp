#include "aml/service/service.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>

#include "aml/serialize.hpp"

namespace aml::service {

namespace fs = std::filesystem;
using nlohmann::json;

DataLayout DataLayout::resolve(const std::optional<fs::path>& dir) {
  if (dir) return {*dir};
  if (const char* env = std::getenv("AML_DATA_DIR"); env && *env) return {fs::path(env)};
  return {fs::path("aml-data")};
}

LearnReport learn_workspace(const DataLayout& layout, const LearnSettings& settings,
                            std::optional<YearMonth> reference_first) {
  auto t0 = std::chrono::steady_clock::now();
  LearnReport rep;
  auto input = load_input(layout.input());
  rep.input_problems = input.problems.size();
  auto prepared = prepare(std::move(input), reference_first);
  auto existing = stored_model_versions(layout.models());
  rep.bundle = learn_models(prepared, settings, existing);
  rep.written_to = model_dir(layout.models(), rep.bundle.version);
  learner::write_bundle(rep.written_to, rep.bundle);

  fs::create_directories(layout.banks());
  bool any = false;
  for (const auto& e : fs::directory_iterator(layout.banks())) any |= e.path().extension() == ".rules";
  if (!any) {
    auto bank = rules::builtin_bank();
    fs::path f = layout.banks() / (bank.version.to_string() + ".rules");
    std::ofstream out(f);
    if (!out) throw IoError("cannot write " + f.string());
    rules::write_bank(out, bank);
    rep.bank_written = f;
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string_view to_string(agents::CaseState s) {
  switch (s) {
    case agents::CaseState::AgentDecided: return "AgentDecided";
    case agents::CaseState::Escalated: return "Escalated";
    case agents::CaseState::AnalystDecided: return "AnalystDecided";
  }
  return "?";
}

std::optional<agents::CaseState> parse_case_state(std::string_view s) {
  for (auto c : {agents::CaseState::AgentDecided, agents::CaseState::Escalated, agents::CaseState::AnalystDecided})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

Service::Service(ServiceConfig config) : config_(std::move(config)), store_(config_.layout.store()) {
  if (!config_.clock) config_.clock = agents::system_clock_now;
}

Service::~Service() = default;

std::string Service::now() const { return config_.clock(); }

void Service::ensure_ready() {
  std::lock_guard lock(mu_);
  if (deployment_) return;
  const auto& L = config_.layout;
  auto versions = stored_model_versions(L.models());
  if (versions.empty())
    throw ConfigError("no model bundle under " + L.models().string() + "; run `amlctl learn` first");
  auto models = std::make_shared<const learner::ModelBundle>(learner::read_bundle(model_dir(L.models(), versions.back())));

  banks_ = std::make_unique<rules::BankRegistry>(L.banks());
  banks_->refresh();
  auto bank = banks_->latest();
  if (!bank) throw ConfigError("no valid rule bank under " + L.banks().string() + "; run `amlctl learn` first");

  prepared_ = std::make_unique<Prepared>(prepare(load_input(L.input()), config_.reference_first));

  agents::DeploymentOptions opts;
  opts.runtime = config_.runtime;
  opts.matrix = config_.matrix;
  opts.evolution = config_.evolution;
  opts.decision_log = L.decisions();
  opts.clock = config_.clock;
  deployment_ = std::make_unique<agents::Deployment>(
      opts, bank, models, [this](Date d) { return *window(d); }, client_directory(*prepared_));
  for (const auto& p : products(*prepared_)) deployment_->add_product(p);
}

std::shared_ptr<const std::vector<profiler::ClientProfile>> Service::window(Date d) {
  std::lock_guard lock(mu_);
  if (auto it = windows_.find(d); it != windows_.end()) return it->second;
  if (windows_.size() >= 4) windows_.erase(windows_.begin());
  auto w = std::make_shared<const std::vector<profiler::ClientProfile>>(window_profiles(*prepared_, d));
  windows_[d] = w;
  return w;
}

std::shared_ptr<const learner::ModelBundle> Service::models() const {
  std::lock_guard lock(mu_);
  return deployment_ ? deployment_->models() : nullptr;
}

AnalysisRun Service::run_analysis(const RunRequest& req, bool* reused) {
  if (req.mar) {
    try {
      rules::validate_mar(*req.mar);
    } catch (const ConfigError& e) {
      throw ValidationError(e.what());
    }
  }
  ensure_ready();
  std::lock_guard lock(mu_);
  if (banks_->refresh())
    if (auto b = banks_->latest()) deployment_->set_bank(b);
  auto bank = banks_->latest();
  auto models = deployment_->models();

  const std::string id = run_id(req.analysis_date, req.mar, req.product, req.client_id, bank->version, models->version);
  if (auto stored = store_.get(id)) {
    if (reused) *reused = true;
    return *stored;
  }
  if (reused) *reused = false;

  AnalysisRun run;
  run.id = id;
  run.analysis_date = req.analysis_date;
  run.mar = req.mar;
  run.product = req.product;
  run.client_id = req.client_id;
  run.bank_version = bank->version;
  run.normative_rules = bank->normative.size();
  run.profile_rules = bank->profile_based.size();
  run.model_version = models->version;
  for (const auto& [k, m] : models->segments) run.segments[k] = {m.rules.rules.size(), models->version};

  run.started_at = now();
  agents::AnalyzeRequest ar;
  ar.request_id = id;
  ar.mode = req.client_id ? agents::ScanMode::ByClient : agents::ScanMode::ByTransaction;
  ar.analysis_date = req.analysis_date;
  ar.mar = req.mar;
  ar.product = req.product;
  ar.client_id = req.client_id;
  ar.bank_version = bank->version;
  auto outcome = deployment_->analyze(ar);
  if (outcome.rejected) throw ValidationError(outcome.rejected->reason);
  if (!outcome.complete) throw Error("capture did not complete for run " + id);
  run.captured_at = now();

  run.analysis_started_at = now();
  auto& done = *outcome.complete;
  run.analyzed = done.scanned;
  run.phase1 = done.phase1;
  run.errors = done.errors;
  run.suspicions = std::move(done.suspicions);
  std::map<std::string, agents::DecisionOutcome> by_id;
  for (auto& d : outcome.decisions) by_id[d.suspicion_id] = d;
  for (std::size_t i = 0; i < run.suspicions.size(); ++i) {
    const auto& s = run.suspicions[i];
    auto it = by_id.find(s.id());
    if (it == by_id.end()) throw Error("no decision for suspicion " + s.id());
    run.agent_verdicts.push_back(it->second);
    for (const auto& m : s.triggered) {
      auto& v = run.by_rule[m.rule_id];
      if (v.empty() || v.back() != i + 1) v.push_back(i + 1);
      if (!run.rule_texts.count(m.rule_id))
        if (const auto* r = bank->find(m.rule_id)) run.rule_texts[m.rule_id] = {r->text, r->citation};
    }
  }
  run.finished_at = now();
  store_.put(run);
  return run;
}

std::vector<std::string> Service::run_ids() const { return store_.ids(); }

AnalysisRun Service::get_run(const std::string& id) const {
  auto r = store_.get(id);
  if (!r) throw NotFoundError("unknown run " + id);
  return *r;
}

TriageItem Service::make_item(const AnalysisRun& run, std::size_t ordinal) const {
  if (ordinal == 0 || ordinal > run.suspicions.size())
    throw NotFoundError("run " + run.id + " has no item " + std::to_string(ordinal));
  TriageItem it;
  it.run_id = run.id;
  it.ordinal = ordinal;
  it.total = run.suspicions.size();
  it.suspicion = run.suspicions[ordinal - 1];
  it.agent = run.agent_verdicts[ordinal - 1];
  it.state = it.agent.verdict == agents::Verdict::Escalated ? agents::CaseState::Escalated
                                                             : agents::CaseState::AgentDecided;
  if (it.agent.source == agents::Source::Analyst) {
    it.state = agents::CaseState::AnalystDecided;
    it.analyst = it.agent.verdict;
  }
  std::lock_guard lock(mu_);
  if (deployment_)
    if (const auto* st = deployment_->decisions().status(it.suspicion.id())) {
      it.state = st->state;
      if (st->state == agents::CaseState::AnalystDecided) it.analyst = st->verdict;
    }
  return it;
}

std::vector<TriageItem> Service::queue(const std::string& run_id, const QueueFilter& f) const {
  auto run = get_run(run_id);
  std::vector<TriageItem> out;
  for (std::size_t i = 1; i <= run.suspicions.size(); ++i) {
    auto it = make_item(run, i);
    if (f.profile_class && it.suspicion.analysis_class != *f.profile_class) continue;
    if (f.state && it.state != *f.state) continue;
    if (f.rule && std::none_of(it.suspicion.triggered.begin(), it.suspicion.triggered.end(),
                               [&](const rules::RuleMatch& m) { return m.rule_id == *f.rule; }))
      continue;
    out.push_back(std::move(it));
  }
  return out;
}

TriageItem Service::item(const std::string& run_id, std::size_t ordinal) const {
  return make_item(get_run(run_id), ordinal);
}

TriageItem Service::post_verdict(const std::string& run_id, std::size_t ordinal, agents::Verdict v) {
  auto run = get_run(run_id);
  auto current = make_item(run, ordinal);
  ensure_ready();
  std::lock_guard lock(mu_);
  // messages name the item, not the account
  const std::string where = "item " + std::to_string(ordinal) + " of run " + run_id;
  try {
    deployment_->verdict(current.suspicion.id(), v);
  } catch (const ConflictError&) {
    throw ConflictError(where + " is already decided");
  } catch (const NotFoundError&) {
    throw NotFoundError(where + " has no open case");
  } catch (const ValidationError&) {
    throw ValidationError("analyst verdict must be Confirmed or Rejected");
  }
  return make_item(run, ordinal);
}

std::string Service::report(const std::string& run_id, const std::optional<std::string>& rule) const {
  return render_reports(get_run(run_id), {config_.mask, rule});
}

agents::ProfileSuggestion Service::suggest_profiles() {
  ensure_ready();
  std::lock_guard lock(mu_);
  auto newer = next_cycle_profiles(*prepared_);
  std::vector<agents::EvolutionInput> inputs;
  for (const auto& [kind, _] : deployment_->models()->segments)
    inputs.push_back({kind, segment_profiles(prepared_->base, kind), segment_profiles(newer, kind)});
  return deployment_->suggest_profiles(inputs);
}

std::vector<agents::ProfileSuggestion> Service::open_suggestions() const {
  std::lock_guard lock(mu_);
  std::vector<agents::ProfileSuggestion> out;
  if (!deployment_) return out;
  return deployment_->open_suggestions();
}

Version Service::validate_profiles(const agents::ProfileValidation& v) {
  ensure_ready();
  std::lock_guard lock(mu_);
  auto open = deployment_->open_suggestions();
  if (std::none_of(open.begin(), open.end(), [&](const auto& s) { return s.suggestion_id == v.suggestion_id; }))
    throw NotFoundError("unknown or closed suggestion " + v.suggestion_id);
  auto before = deployment_->models()->version;
  auto after = deployment_->validate_profiles(v);
  if (after->version != before) learner::write_bundle(model_dir(config_.layout.models(), after->version), *after);
  return after->version;
}

json Service::decision_matrix() const {
  std::lock_guard lock(mu_);
  if (!deployment_) return agents::DecisionMatrix(config_.matrix).to_json();
  return deployment_->decisions().matrix().to_json();
}

json Service::rule_bank() const {
  std::lock_guard lock(mu_);
  json rules = json::array();
  if (!banks_) return json{{"version", nullptr}, {"rules", rules}};
  auto bank = banks_->latest();
  if (!bank) return json{{"version", nullptr}, {"rules", rules}};
  for (const auto* set : {&bank->normative, &bank->profile_based})
    for (const auto& r : *set) {
      json classes = json::array();
      for (auto c : r.classes) classes.push_back(to_string(c));
      rules.push_back({{"id", r.id},
                       {"family", r.family() == rules::RuleFamily::Normative ? "normative" : "profile"},
                       {"classes", classes},
                       {"predicate", r.predicate.to_string()},
                       {"text", r.text},
                       {"citation", r.citation}});
    }
  return json{{"version", bank->version.to_string()}, {"rules", rules}};
}

json Service::item_json(const TriageItem& it, const AnalysisRun& run) const {
  json s = it.suspicion;
  if (config_.mask) {
    s["key"] = {{"client_id", "██████"}, {"agency", "██████"}, {"account", "██████"}};
    s["profile"]["key"] = s["key"];
  }
  s.erase("id");
  json rules = json::array();
  for (const auto& m : it.suspicion.triggered) {
    json r{{"rule_id", m.rule_id}, {"detail", m.detail}, {"text", nullptr}, {"citation", nullptr}};
    if (auto t = run.rule_texts.find(m.rule_id); t != run.rule_texts.end()) {
      r["text"] = t->second.text;
      r["citation"] = t->second.citation;
    }
    rules.push_back(std::move(r));
  }
  return json{{"run_id", it.run_id},
              {"ordinal", it.ordinal},
              {"total", it.total},
              {"state", to_string(it.state)},
              {"agent_verdict", agents::to_string(it.agent.verdict)},
              {"agent_source", agents::to_string(it.agent.source)},
              {"matrix_key", it.agent.matrix_key},
              {"analyst_verdict", it.analyst ? json(agents::to_string(*it.analyst)) : json(nullptr)},
              {"suspicion", std::move(s)},
              {"rules", std::move(rules)}};
}

json Service::run_summary_json(const AnalysisRun& r) const {
  json segs = json::object();
  for (const auto& [k, s] : r.segments)
    segs[std::string(to_string(k))] = {{"learned_rules", s.learned_rules},
                                       {"model_version", s.model_version.to_string()}};
  json phase1 = json::object();
  for (const auto& [k, c] : r.phase1) phase1[std::string(to_string(k))] = c;
  std::size_t escalated = 0;
  for (const auto& d : r.agent_verdicts) escalated += d.verdict == agents::Verdict::Escalated;
  json by_rule = json::object();
  for (const auto& [id, v] : r.by_rule) by_rule[id] = v.size();
  return json{{"id", r.id},
              {"status", "completed"},
              {"analysis_date", format_date(r.analysis_date)},
              {"mar", r.mar ? json(*r.mar) : json(nullptr)},
              {"product", r.product},
              {"client_id", r.client_id ? json(*r.client_id) : json(nullptr)},
              {"bank_version", r.bank_version.to_string()},
              {"model_version", r.model_version.to_string()},
              {"rules", {{"normative", r.normative_rules}, {"profile", r.profile_rules}, {"learned", segs}}},
              {"analyzed", r.analyzed},
              {"suspicions", r.suspicions.size()},
              {"suspicion_percent", percent_4dp(r.suspicions.size(), r.analyzed)},
              {"escalated_at_run", escalated},
              {"phase1", std::move(phase1)},
              {"by_rule", std::move(by_rule)},
              {"errors", r.errors},
              {"timestamps",
               {{"started", r.started_at},
                {"captured", r.captured_at},
                {"analysis_started", r.analysis_started_at},
                {"finished", r.finished_at}}}};
}

}  // namespace aml::service
