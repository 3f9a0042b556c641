#include "aml/agents/runtime.hpp"

#include <algorithm>
#include <sstream>

namespace aml::agents {

// ---------------------------------------------------------------------------
// Runtime

Runtime::Runtime(RuntimeOptions options) : options_(options), rng_(options.seed) {}

void Runtime::add(std::shared_ptr<Agent> agent) {
  AgentId id = agent->id();
  if (id.role == Role::External) throw ConfigError("the external endpoint is not an agent");
  if (agents_.count(id)) throw ConfigError("agent " + id.to_string() + " already registered");
  agents_.emplace(std::move(id), std::move(agent));
}

void Runtime::remove(const AgentId& id) { agents_.erase(id); }
bool Runtime::has(const AgentId& id) const { return agents_.count(id) > 0; }

Agent* Runtime::find(const AgentId& id) const {
  auto it = agents_.find(id);
  return it == agents_.end() ? nullptr : it->second.get();
}

void Runtime::post(AgentId from, AgentId to, Message m) {
  pending_.push_back({std::move(from), std::move(to), std::move(m), next_seq_++});
}

void Runtime::post_all(const AgentId& from, Outbox& out) {
  for (auto& [to, m] : out.out_) post(from, std::move(to), std::move(m));
  out.out_.clear();
}

std::size_t Runtime::run() {
  std::size_t delivered = 0;
  std::set<std::uint64_t> duplicated;
  while (!pending_.empty()) {
    if (delivered >= options_.max_deliveries) throw Error("runtime: delivery budget exhausted");
    std::size_t pick = 0;
    if (options_.shuffle && pending_.size() > 1)
      pick = std::uniform_int_distribution<std::size_t>(0, pending_.size() - 1)(rng_);
    Envelope e = std::move(pending_[pick]);
    pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(pick));
    ++delivered;
    if (options_.keep_trace) trace_.push_back(to_json(e));

    if (e.to.role == Role::External) {
      external_.push_back(std::move(e));
      continue;
    }
    Agent* agent = find(e.to);
    if (!agent) {
      undeliverable_.push_back(std::move(e));
      continue;
    }
    if (options_.duplicate_probability > 0 && !duplicated.count(e.sequence) &&
        std::uniform_real_distribution<double>(0, 1)(rng_) < options_.duplicate_probability) {
      duplicated.insert(e.sequence);
      pending_.push_back(e);
    }
    Outbox out;
    agent->handle(e, out);
    post_all(e.to, out);
  }
  return delivered;
}

std::vector<Envelope> Runtime::take_external() {
  std::vector<Envelope> out;
  out.swap(external_);
  return out;
}

std::string Runtime::trace_text() const {
  std::string s;
  for (const auto& j : trace_) s += j.dump() + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// CTS

CaptureAgent::CaptureAgent(std::string product, ProfileSource source,
                           std::shared_ptr<const rules::RuleBank> bank,
                           std::shared_ptr<const learner::ModelBundle> models)
    : product_(std::move(product)), source_(std::move(source)), bank_(std::move(bank)),
      models_(std::move(models)) {}

ScanResult CaptureAgent::scan(const std::string& request_id, Date date, std::optional<double> mar,
                              const std::optional<std::string>& client_id,
                              const std::optional<Version>& pinned) const {
  ScanResult r;
  r.request_id = request_id;
  r.product = product_;
  if (!bank_) {
    r.error = "no rule bank loaded";
    return r;
  }
  if (pinned && *pinned != bank_->version) {
    r.error = "rule bank " + pinned->to_string() + " not available (have " +
              bank_->version.to_string() + ")";
    return r;
  }
  if (!models_) {
    r.error = "no profile model loaded";
    return r;
  }
  try {
    auto profiles = source_(date);
    if (client_id)
      std::erase_if(profiles, [&](const profiler::ClientProfile& p) { return p.key.client_id != *client_id; });
    std::erase_if(profiles, [&](const profiler::ClientProfile& p) { return product_of(p.key) != product_; });
    auto res = rules::capture(profiles, *bank_, *models_, {date, mar});
    r.suspicions = std::move(res.suspicions);
    r.scanned = res.analyzed;
    r.phase1 = std::move(res.phase1);
  } catch (const Error& e) {
    r.suspicions.clear();
    r.scanned = 0;
    r.phase1.clear();
    r.error = e.what();
  }
  return r;
}

void CaptureAgent::handle(const Envelope& e, Outbox& out) {
  if (const auto* req = std::get_if<AnalyzeRequest>(&e.message)) {
    auto client = req->mode == ScanMode::ByClient ? req->client_id : std::nullopt;
    auto r = scan(req->request_id, req->analysis_date, req->mar, client, req->bank_version);
    for (const auto& s : r.suspicions) out.send(e.from, SuspicionFound{r.request_id, product_, s});
    out.send(e.from, std::move(r));
  } else if (const auto* req = std::get_if<ClientScanRequest>(&e.message)) {
    auto r = scan(req->request_id, req->analysis_date, req->mar, req->client_id, req->bank_version);
    r.client_id = req->client_id;
    r.phase1.clear();
    for (const auto& s : r.suspicions) out.send(e.from, SuspicionFound{r.request_id, product_, s});
    out.send(e.from, std::move(r));
  }
}

// ---------------------------------------------------------------------------
// GCT

CaptureManager::CaptureManager(ClientDirectory directory) : directory_(std::move(directory)) {}

void CaptureManager::add_product(const std::string& product) { products_.insert(product); }

void CaptureManager::remove_product(const std::string& product, Outbox& out) {
  products_.erase(product);
  std::vector<std::string> touched;
  for (auto& [id, p] : pending_) {
    bool hit = false;
    if (p.primary.count(product) && !p.primary_done.count(product)) {
      p.primary_done.insert(product);
      hit = true;
    }
    for (const auto& f : p.fanned)
      if (f.second == product && !p.fanned_done.count(f)) {
        p.fanned_done.insert(f);
        hit = true;
      }
    if (hit) {
      p.errors.push_back(product + ": product removed before replying");
      touched.push_back(id);
    }
  }
  for (const auto& id : touched) maybe_complete(id, out);
}

void CaptureManager::handle(const Envelope& e, Outbox& out) {
  if (const auto* r = std::get_if<AnalyzeRequest>(&e.message)) {
    start(*r, e.from, out);
  } else if (const auto* r = std::get_if<ScanResult>(&e.message)) {
    on_result(*r, e.from, out);
  } else if (const auto* f = std::get_if<SuspicionFound>(&e.message)) {
    auto it = pending_.find(f->request_id);
    if (it == pending_.end() || e.from.role != Role::CTS) return;
    it->second.found.emplace(f->suspicion.key, f->suspicion);
    fan_out(it->second, f->suspicion, e.from.product, out);
  }
}

void CaptureManager::start(const AnalyzeRequest& r, const AgentId& from, Outbox& out) {
  if (pending_.count(r.request_id) || completed_.count(r.request_id)) return;
  auto reject = [&](std::string why) {
    completed_.insert(r.request_id);
    out.send(from, RequestRejected{r.request_id, std::move(why)});
  };
  if (r.request_id.empty()) return reject("request without id");
  const bool all = r.product == kAllProducts;
  if (!all && !products_.count(r.product)) return reject("unknown product '" + r.product + "'");

  std::set<std::string> targets;
  if (r.mode == ScanMode::ByTransaction) {
    targets = all ? products_ : std::set<std::string>{r.product};
  } else {
    if (!r.client_id || r.client_id->empty()) return reject("client scan without client id");
    auto it = directory_.find(*r.client_id);
    if (it != directory_.end())
      for (const auto& prod : it->second)
        if (products_.count(prod) && (all || prod == r.product)) targets.insert(prod);
  }

  Pending p;
  p.request = r;
  p.requester = from;
  p.primary = targets;
  pending_.emplace(r.request_id, std::move(p));
  for (const auto& prod : targets) out.send(cts_id(prod), r);
  maybe_complete(r.request_id, out);
}

void CaptureManager::fan_out(Pending& p, const rules::Suspicion& s, const std::string& origin,
                             Outbox& out) {
  auto it = directory_.find(s.key.client_id);
  if (it == directory_.end()) return;
  for (const auto& prod : it->second) {
    if (prod == origin || !products_.count(prod) || p.primary.count(prod)) continue;
    auto key = std::make_pair(s.key.client_id, prod);
    if (!p.fanned.insert(key).second) continue;
    out.send(cts_id(prod), ClientScanRequest{p.request.request_id, s.key.client_id, prod, origin,
                                             p.request.analysis_date, p.request.mar,
                                             p.request.bank_version});
  }
}

void CaptureManager::on_result(const ScanResult& r, const AgentId& from, Outbox& out) {
  auto it = pending_.find(r.request_id);
  if (it == pending_.end() || from.role != Role::CTS) return;
  Pending& p = it->second;
  const std::string& prod = from.product;
  if (r.client_id) {
    auto key = std::make_pair(*r.client_id, prod);
    if (!p.fanned.count(key) || !p.fanned_done.insert(key).second) return;
  } else {
    if (!p.primary.count(prod) || !p.primary_done.insert(prod).second) return;
    p.scanned += r.scanned;
    for (const auto& [kind, c] : r.phase1) {
      auto& acc = p.phase1[kind];
      for (std::size_t i = 0; i < 5; ++i) {
        acc.original[i] += c.original[i];
        acc.adjusted[i] += c.adjusted[i];
      }
    }
  }
  if (r.error) p.errors.push_back(prod + ": " + *r.error);
  for (const auto& s : r.suspicions) {
    p.found.emplace(s.key, s);
    fan_out(p, s, prod, out);
  }
  maybe_complete(r.request_id, out);
}

void CaptureManager::maybe_complete(const std::string& request_id, Outbox& out) {
  auto it = pending_.find(request_id);
  if (it == pending_.end()) return;
  Pending& p = it->second;
  if (p.primary_done.size() != p.primary.size() || p.fanned_done.size() != p.fanned.size()) return;
  AllScansComplete done;
  done.request_id = request_id;
  for (auto& [_, s] : p.found) done.suspicions.push_back(std::move(s));
  done.scanned = p.scanned;
  done.phase1 = std::move(p.phase1);
  done.products.assign(p.primary.begin(), p.primary.end());
  done.errors = std::move(p.errors);
  std::sort(done.errors.begin(), done.errors.end());
  AgentId requester = p.requester;
  pending_.erase(it);
  completed_.insert(request_id);
  out.send(apd_id(), done);
  out.send(requester, std::move(done));
}

// ---------------------------------------------------------------------------
// APD

DecisionAgent::DecisionAgent(std::shared_ptr<DecisionEngine> engine) : engine_(std::move(engine)) {}

void DecisionAgent::handle(const Envelope& e, Outbox& out) {
  if (const auto* done = std::get_if<AllScansComplete>(&e.message)) {
    if (!seen_requests_.insert(done->request_id).second) return;
    for (const auto& s : done->suspicions) out.send(external_id(), engine_->assess(s, done->request_id));
  } else if (const auto* d = std::get_if<DecisionOutcome>(&e.message)) {
    if (d->source != Source::Analyst) return;
    const CaseStatus* st = engine_->status(d->suspicion_id);
    if (st && st->state == CaseState::AnalystDecided && st->verdict == d->verdict) return;
    try {
      out.send(e.from, engine_->record_analyst(d->suspicion_id, d->verdict));
    } catch (const Error& err) {
      out.send(e.from, RequestRejected{d->suspicion_id, err.what()});
    }
  }
}

// ---------------------------------------------------------------------------
// EBP

EvolutionAgent::EvolutionAgent(std::shared_ptr<const learner::ModelBundle> models,
                               learner::EvolutionOptions options, Publish publish)
    : models_(std::move(models)), options_(options), publish_(std::move(publish)) {}

ProfileSuggestion EvolutionAgent::suggest(const std::vector<EvolutionInput>& inputs) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "SUG-%04d", next_suggestion_++);
  ProfileSuggestion s;
  s.suggestion_id = buf;
  std::ostringstream note;
  int n = 0;
  for (const auto& in : inputs) {
    auto seg = models_->segments.find(in.segment);
    if (seg == models_->segments.end()) {
      note << to_string(in.segment) << ": no model; ";
      continue;
    }
    auto report = learner::compare_cycles(seg->second, in.reference, in.newer, options_);
    if (report.insufficient) {
      note << to_string(in.segment) << ": insufficient data (" << report.newer << " profiles, need "
           << options_.min_profiles << "); ";
      continue;
    }
    note << to_string(in.segment) << ": " << report.newer << " profiles, " << report.outliers
         << " outside the base, " << report.diffs.size() << " change(s); ";
    for (auto& d : report.diffs) {
      ProfileCandidate c;
      c.id = s.suggestion_id + "-" + std::to_string(++n);
      c.kind = d.kind == learner::ProfileDiff::Kind::NewProfile ? ProfileCandidate::Kind::NewProfile
                                                                : ProfileCandidate::Kind::Shifted;
      c.segment = in.segment;
      c.cluster = d.cluster;
      c.centroid = d.centroid;
      c.raw_centroid = d.raw_centroid;
      c.support = d.kind == learner::ProfileDiff::Kind::NewProfile ? d.members.size() : 0;
      c.distance = d.distance;
      c.proposed_class = d.kind == learner::ProfileDiff::Kind::NewProfile
                             ? ProfileClass::Risk1
                             : seg->second.classification.class_of(d.cluster);
      s.candidates.push_back(c);
      held_[c.id] = {c, std::move(d)};
    }
  }
  s.note = note.str();
  if (!s.note.empty()) s.note.resize(s.note.size() - 2);
  open_[s.suggestion_id] = s;
  return s;
}

void EvolutionAgent::handle(const Envelope& e, Outbox& out) {
  const auto* v = std::get_if<ProfileValidation>(&e.message);
  if (!v || closed_.count(v->suggestion_id)) return;
  auto it = open_.find(v->suggestion_id);
  if (it == open_.end()) {
    out.send(e.from, RequestRejected{v->suggestion_id, "unknown suggestion"});
    return;
  }
  std::set<std::string> ids;
  for (const auto& c : it->second.candidates) ids.insert(c.id);
  for (const auto& a : v->accepted)
    if (!ids.count(a)) {
      out.send(e.from, RequestRejected{v->suggestion_id, "candidate " + a + " is not part of it"});
      return;
    }
  for (const auto& a : v->accepted)
    if (std::find(v->rejected.begin(), v->rejected.end(), a) != v->rejected.end()) {
      out.send(e.from, RequestRejected{v->suggestion_id, "candidate " + a + " both accepted and rejected"});
      return;
    }

  if (!v->accepted.empty()) {
    auto next = std::make_shared<learner::ModelBundle>(*models_);
    std::vector<Version> existing{models_->version};
    next->version = learner::next_version(models_->version.date, existing);
    for (auto& [kind, model] : next->segments) {
      std::vector<learner::ProfileDiff> diffs;
      std::vector<ProfileClass> classes;
      for (const auto& a : v->accepted) {
        const Held& h = held_.at(a);
        if (h.candidate.segment != kind) continue;
        diffs.push_back(h.diff);
        classes.push_back(h.candidate.proposed_class);
      }
      model = learner::apply_diffs(model, diffs, classes);
    }
    models_ = std::move(next);
    if (publish_) publish_(models_);
  }
  for (const auto& c : it->second.candidates) held_.erase(c.id);
  closed_.insert(v->suggestion_id);
  open_.erase(it);
  out.send(e.from, *v);
}

// ---------------------------------------------------------------------------
// Deployment

Deployment::Deployment(DeploymentOptions options, std::shared_ptr<const rules::RuleBank> bank,
                       std::shared_ptr<const learner::ModelBundle> models, WindowSource source,
                       ClientDirectory directory)
    : runtime_(options.runtime), bank_(std::move(bank)), models_(std::move(models)),
      source_(std::move(source)) {
  engine_ = std::make_shared<DecisionEngine>(options.matrix, options.clock, options.decision_log);
  gct_ = std::make_shared<CaptureManager>(std::move(directory));
  ebp_ = std::make_shared<EvolutionAgent>(models_, options.evolution,
                                          [this](std::shared_ptr<const learner::ModelBundle> m) {
                                            models_ = m;
                                            for (auto& [_, c] : cts_) c->set_models(m);
                                          });
  runtime_.add(gct_);
  runtime_.add(std::make_shared<DecisionAgent>(engine_));
  runtime_.add(ebp_);
}

void Deployment::add_product(const std::string& product) {
  if (cts_.count(product)) throw ConflictError("product " + product + " already deployed");
  auto src = source_;
  auto agent = std::make_shared<CaptureAgent>(product, [src](Date d) { return src(d); }, bank_, models_);
  runtime_.add(agent);
  cts_[product] = agent;
  gct_->add_product(product);
}

void Deployment::remove_product(const std::string& product) {
  if (!cts_.count(product)) throw NotFoundError("product " + product + " not deployed");
  runtime_.remove(cts_id(product));
  cts_.erase(product);
  Outbox out;
  gct_->remove_product(product, out);
  runtime_.post_all(gct_id(), out);
  runtime_.run();
}

std::vector<std::string> Deployment::products() const {
  std::vector<std::string> out;
  for (const auto& [p, _] : cts_) out.push_back(p);
  return out;
}

void Deployment::set_bank(std::shared_ptr<const rules::RuleBank> bank) {
  bank_ = std::move(bank);
  for (auto& [_, c] : cts_) c->set_bank(bank_);
}

std::vector<Envelope> Deployment::pump() {
  runtime_.run();
  return runtime_.take_external();
}

AnalysisOutcome Deployment::analyze(const AnalyzeRequest& request) {
  runtime_.post(external_id(), gct_id(), request);
  AnalysisOutcome o;
  for (auto& e : pump()) {
    if (auto* done = std::get_if<AllScansComplete>(&e.message); done && done->request_id == request.request_id) {
      if (!o.complete) o.complete = std::move(*done);
    } else if (auto* rej = std::get_if<RequestRejected>(&e.message);
               rej && rej->request_id == request.request_id) {
      if (!o.rejected) o.rejected = std::move(*rej);
    } else if (auto* d = std::get_if<DecisionOutcome>(&e.message); d && d->request_id == request.request_id) {
      o.decisions.push_back(std::move(*d));
    }
  }
  std::sort(o.decisions.begin(), o.decisions.end(),
            [](const DecisionOutcome& a, const DecisionOutcome& b) { return a.suspicion_id < b.suspicion_id; });
  o.decisions.erase(std::unique(o.decisions.begin(), o.decisions.end(),
                                [](const DecisionOutcome& a, const DecisionOutcome& b) {
                                  return a.suspicion_id == b.suspicion_id;
                                }),
                    o.decisions.end());
  return o;
}

DecisionOutcome Deployment::verdict(const std::string& suspicion_id, Verdict v) {
  engine_->check_analyst(suspicion_id, v);
  runtime_.post(external_id(), apd_id(), DecisionOutcome{suspicion_id, v, Source::Analyst, {}, {}});
  for (auto& e : pump())
    if (auto* d = std::get_if<DecisionOutcome>(&e.message); d && d->suspicion_id == suspicion_id)
      return *d;
  throw Error("decision agent did not answer for " + suspicion_id);
}

ProfileSuggestion Deployment::suggest_profiles(const std::vector<EvolutionInput>& inputs) {
  return ebp_->suggest(inputs);
}

std::vector<ProfileSuggestion> Deployment::open_suggestions() const {
  std::vector<ProfileSuggestion> out;
  for (const auto& [_, s] : ebp_->open_suggestions()) out.push_back(s);
  return out;
}

std::shared_ptr<const learner::ModelBundle> Deployment::validate_profiles(const ProfileValidation& v) {
  runtime_.post(external_id(), ebp_id(), v);
  for (auto& e : pump())
    if (auto* rej = std::get_if<RequestRejected>(&e.message); rej && rej->request_id == v.suggestion_id)
      throw ValidationError(rej->reason);
  return models_;
}

}  // namespace aml::agents
