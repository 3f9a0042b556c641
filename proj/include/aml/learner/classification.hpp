#pragma once

// Cluster-to-risk-class mapping and the cross-class reclassification table.

#include <optional>
#include <span>
#include <vector>

#include "aml/learner/features.hpp"

namespace aml::learner {

struct ProfileClassification {
  ClientKind segment = ClientKind::SingularPerson;
  std::vector<ProfileClass> mapping;  // cluster id -> class
  /// Set once a human has reviewed the automatic mapping.
  bool confirmed = false;

  ProfileClass class_of(int cluster) const;
  bool has_class(ProfileClass c) const;
  friend bool operator==(const ProfileClassification&, const ProfileClassification&) = default;
};

/// Descriptive statistics of one cluster, from raw (unstandardized) members.
struct ClusterStats {
  std::size_t population = 0;
  double mean_movements = 0;
  double mean_high_band = 0;   // bands 4..6
  double mean_pct_ted = 0;
  double near_limit_share = 0; // band just under the top threshold over movements
};

struct RiskScoring {
  /// Band whose upper edge is the reporting threshold.
  int near_limit_band = 5;
};

std::vector<ClusterStats> cluster_stats(const Clustering& clustering,
                                        std::span<const profiler::ClientProfile> profiles,
                                        const RiskScoring& scoring = {});

/// Proposes classes from cluster statistics:
///   Risk3    max mean_high_band * mean_pct_ted
///   Risk2    max near_limit_share among the rest
///   LowUsage min mean_movements among the rest
///   Standard largest population among the rest
///   Risk1    everything left
/// With fewer clusters than classes, Risk1 is dropped first, then LowUsage,
/// Risk2 and Risk3; a single cluster is Standard. The result is unconfirmed.
ProfileClassification map_risk(const Clustering& clustering,
                               std::span<const profiler::ClientProfile> profiles,
                               ClientKind segment, const RiskScoring& scoring = {});

struct ReclassEntry {
  std::size_t rule_index = 0;  // into the selected rule set
  ProfileClass from = ProfileClass::Standard;
  ProfileClass to = ProfileClass::Risk3;
  std::size_t overlap = 0;     // training members of `from` captured by the rule

  friend bool operator==(const ReclassEntry&, const ReclassEntry&) = default;
};

/// Ordered by target severity (Risk3 first), then rule index, then source.
struct ReclassTable {
  std::vector<ReclassEntry> entries;

  friend bool operator==(const ReclassTable&, const ReclassTable&) = default;
};

/// One entry per (rule, reclassifiable class) where a rule predicting a
/// Risk2/Risk3 cluster fires for training members of that class.
ReclassTable build_reclass_table(const InducedRuleSet& rules, const FeatureMatrix& features,
                                 std::span<const int> cluster_labels,
                                 const ProfileClassification& classification);

/// Target class for a profile whose fired rule appears in the table, or
/// nullopt. Non-reclassifiable original classes never move.
template <typename Row>
std::optional<ProfileClass> reclass_target(const ReclassTable& table, const InducedRuleSet& rules,
                                           const Row& raw_features, ProfileClass original) {
  if (!is_reclassifiable(original) || table.entries.empty()) return std::nullopt;
  auto fired = rules.fire(raw_features);
  if (!fired) return std::nullopt;
  for (const auto& e : table.entries)
    if (e.rule_index == *fired) return e.to;
  return std::nullopt;
}

}  // namespace aml::learner
