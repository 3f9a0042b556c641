#pragma once

// A small generated population with learned models, built once per test
// binary.

#include "aml/datagen.hpp"
#include "aml/ruleengine.hpp"
#include "aml/service/service.hpp"

#include "support.hpp"

namespace aml::test {

struct World {
  datagen::Dataset data;
  service::Prepared prepared;
  learner::ModelBundle models;
  rules::RuleBank bank;
  Date analysis_date;
  std::vector<profiler::ClientProfile> window;
};

inline datagen::GeneratorConfig small_config() {
  auto c = datagen::GeneratorConfig::defaults();
  c.clients = 2500;
  c.seed = 7;
  for (auto& [s, n] : c.scenarios) n = 3;
  return c;
}

inline const World& world() {
  static const World w = [] {
    World w;
    auto cfg = small_config();
    w.data = datagen::generate(cfg);
    service::InputData in{w.data.clients, w.data.transactions, {}};
    w.prepared = service::prepare(std::move(in));
    service::LearnSettings s;
    s.singular.k = 5;
    s.entity.k = 4;
    w.models = service::learn_models(w.prepared, s);
    w.bank = rules::builtin_bank();
    w.analysis_date = cfg.analysis_date;
    w.window = service::window_profiles(w.prepared, w.analysis_date);
    return w;
  }();
  return w;
}

/// Workspace with the world's input, one learned bundle and the builtin bank.
inline service::DataLayout workspace(const std::string& name) {
  service::DataLayout l{scratch_dir(name)};
  datagen::emit(world().data, l.input());
  service::LearnSettings s;
  s.singular.k = 5;
  s.entity.k = 4;
  service::learn_workspace(l, s);
  return l;
}

inline service::ServiceConfig config_for(const service::DataLayout& l) {
  service::ServiceConfig c;
  c.layout = l;
  c.clock = tick_clock();
  c.matrix.min_support = 1;
  return c;
}

/// The reviewed reports: file name under tests/golden -> text. Built from a
/// fresh workspace and service so the clock ticks the same way every time.
inline std::map<std::string, std::string> golden_reports() {
  auto l = workspace("golden");
  std::map<std::string, std::string> out;
  {
    service::Service svc(config_for(l));
    auto run = svc.run_analysis({world().analysis_date, 5.0, std::string{agents::kAllProducts}, std::nullopt});
    out["report_mar5.txt"] = svc.report(run.id);
    auto rule = run.by_rule.begin()->first;
    out["report_mar5_" + rule + ".txt"] = svc.report(run.id, rule);
  }
  std::filesystem::remove_all(l.root);
  return out;
}

}  // namespace aml::test
