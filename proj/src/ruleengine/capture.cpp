#include <algorithm>

#include "aml/ruleengine.hpp"

namespace aml::rules {

ProfileClass original_class(const ClientProfile& p, const learner::SegmentModel& model) {
  const auto& c = model.clustering;
  auto it = c.assignment.find(p.key);
  const int cluster = it != c.assignment.end() ? it->second : c.nearest(learner::feature_row(p));
  return model.classification.class_of(cluster);
}

ProfileClass reclassify(const ClientProfile& p, ProfileClass original,
                        const learner::SegmentModel& model) {
  auto target = learner::reclass_target(model.reclass, model.rules, learner::feature_row(p), original);
  return target.value_or(original);
}

std::string Suspicion::id() const {
  return format_date(analysis_date) + "/" + key.to_string();
}

std::vector<RuleMatch> evaluate_rules(const ClientProfile& p, ProfileClass analysis_class,
                                      const RuleBank& bank, std::optional<double> mar) {
  const EffectiveLimits limits =
      mar ? apply_mar(analysis_class, p, *mar) : baseline_limits(analysis_class, p);
  const EvalContext ctx{p, limits};
  std::vector<RuleMatch> out;
  for (const auto* group : {&bank.normative, &bank.profile_based})
    for (const auto& r : *group)
      if (r.applies_to(analysis_class) && r.predicate.evaluate(ctx))
        out.push_back({r.id, r.predicate.explain(ctx)});
  return out;
}

CaptureResult capture(std::span<const ClientProfile> window_profiles, const RuleBank& bank,
                      const learner::ModelBundle& models, const CaptureOptions& options) {
  if (options.mar) validate_mar(*options.mar);
  CaptureResult result;
  result.analyzed = window_profiles.size();

  std::vector<const ClientProfile*> order;
  order.reserve(window_profiles.size());
  for (const auto& p : window_profiles) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const ClientProfile* a, const ClientProfile* b) { return a->key < b->key; });

  for (const ClientProfile* p : order) {
    const auto& model = models.segment(p->client_kind);
    const ProfileClass original = original_class(*p, model);
    const ProfileClass analysis = reclassify(*p, original, model);
    auto& counts = result.phase1[p->client_kind];
    ++counts.original[static_cast<std::size_t>(original)];
    ++counts.adjusted[static_cast<std::size_t>(analysis)];

    auto matches = evaluate_rules(*p, analysis, bank, options.mar);
    if (matches.empty()) continue;
    Suspicion s;
    s.key = p->key;
    s.client_kind = p->client_kind;
    s.analysis_class = analysis;
    s.original_class = original;
    s.triggered = std::move(matches);
    s.profile = *p;
    s.analysis_date = options.analysis_date;
    s.mar = options.mar;
    result.suspicions.push_back(std::move(s));
  }
  return result;
}

}  // namespace aml::rules
