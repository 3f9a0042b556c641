#include "aml/service/pipeline.hpp"

#include <algorithm>

namespace aml::service {

namespace fs = std::filesystem;

namespace {

fs::path find_input(const fs::path& dir, const std::string& name) {
  for (const auto& candidate : {dir / name, dir / (name + ".gz")})
    if (fs::exists(candidate)) return candidate;
  throw IoError("missing " + (dir / name).string() + " (or .gz)");
}

}  // namespace

InputData load_input(const fs::path& dir) {
  InputData in;
  auto cpath = find_input(dir, "clients.csv");
  auto tpath = find_input(dir, "transactions.csv");
  auto clients = ingest::load_clients(cpath);
  auto txs = ingest::load_transactions(tpath);
  for (const auto& e : clients.errors)
    in.problems.push_back(cpath.filename().string() + ":" + std::to_string(e.line) + ": " + e.message);
  for (const auto& e : txs.errors)
    in.problems.push_back(tpath.filename().string() + ":" + std::to_string(e.line) + ": " + e.message);
  in.clients = std::move(clients.records);
  in.transactions = std::move(txs.records);
  return in;
}

Prepared prepare(InputData input, std::optional<YearMonth> reference_first,
                 profiler::ProfileOptions options) {
  Prepared p;
  p.options = std::move(options);
  p.registry = ingest::make_registry(std::move(input.clients));
  auto relevant = ingest::filter_relevant(std::move(input.transactions));
  std::erase_if(relevant, [&](const ingest::Transaction& t) {
    bool unknown = !p.registry.count(t.key.client_id);
    p.unknown_clients += unknown;
    return unknown;
  });
  p.relevant = std::move(relevant);
  if (reference_first) {
    p.reference = {*reference_first};
  } else {
    if (p.relevant.empty()) throw ConfigError("no relevant transactions to derive the reference cycle from");
    auto first = std::min_element(p.relevant.begin(), p.relevant.end(),
                                  [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    auto d = date_of(first->timestamp);
    p.reference = {d.year() / d.month()};
  }
  p.base = profiler::build_profiles(p.relevant, p.reference, p.options, &p.registry).profiles;
  return p;
}

std::vector<profiler::ClientProfile> segment_profiles(const profiler::ProfileMap& base, ClientKind kind) {
  std::vector<profiler::ClientProfile> out;
  for (const auto& [_, prof] : base)
    if (prof.client_kind == kind) out.push_back(prof);
  return out;
}

learner::ModelBundle learn_models(const Prepared& p, const LearnSettings& settings,
                                  std::span<const Version> existing) {
  learner::ModelBundle b;
  b.version = learner::next_version(p.reference.end_date(), existing);
  for (ClientKind kind : {ClientKind::SingularPerson, ClientKind::LegalEntity}) {
    auto profiles = segment_profiles(p.base, kind);
    if (profiles.empty()) continue;
    const auto& opts = kind == ClientKind::SingularPerson ? settings.singular : settings.entity;
    b.segments[kind] = learner::learn_segment(profiles, kind, opts, b.version);
  }
  if (b.segments.empty()) throw ConfigError("no profiles in the reference cycle");
  return b;
}

std::vector<profiler::ClientProfile> window_profiles(const Prepared& p, Date analysis_date) {
  auto win = profiler::window_profile(p.relevant, analysis_date, p.options, &p.registry);
  return profiler::attach_window(p.base, win).profiles;
}

profiler::ProfileMap next_cycle_profiles(const Prepared& p) {
  profiler::Cycle next{p.reference.first + std::chrono::months{12}};
  return profiler::build_profiles(p.relevant, next, p.options, &p.registry).profiles;
}

agents::ClientDirectory client_directory(const Prepared& p) {
  agents::ClientDirectory dir;
  for (const auto& t : p.relevant) dir[t.key.client_id].insert(product_of(t.key));
  return dir;
}

std::vector<std::string> products(const Prepared& p) {
  std::set<std::string> s;
  for (const auto& t : p.relevant) s.insert(product_of(t.key));
  return {s.begin(), s.end()};
}

std::vector<Version> stored_model_versions(const fs::path& models_dir) {
  std::vector<Version> out;
  if (!fs::is_directory(models_dir)) return out;
  for (const auto& e : fs::directory_iterator(models_dir))
    if (e.is_directory())
      if (auto v = Version::parse(e.path().filename().string())) out.push_back(*v);
  std::sort(out.begin(), out.end());
  return out;
}

fs::path model_dir(const fs::path& models_dir, const Version& v) { return models_dir / v.to_string(); }

}  // namespace aml::service
