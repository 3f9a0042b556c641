#pragma once

// The learning pipeline for one client segment: standardize, cluster,
// induce two rule sets, keep the better one, map clusters to risk classes
// and derive the reclassification table. Plus persistence of the result.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aml/learner/classification.hpp"
#include "aml/learner/features.hpp"
#include "aml/learner/induction.hpp"

namespace aml::learner {

enum class RunMode : std::uint8_t {
  KSweep,    // one run per k in k_range
  Restarts,  // `runs` seedings at a fixed k
};

struct LearnOptions {
  std::optional<int> k;                // fixed k; when empty, chosen by sweep
  std::vector<int> k_range = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  RunMode mode = RunMode::KSweep;
  int runs = 11;                       // for RunMode::Restarts
  /// Sweep picks the largest k whose selected rules reach this training
  /// accuracy.
  double min_rule_accuracy = 0.99;
  KMeansOptions kmeans{.k = 2, .seed = 20161130, .max_iter = 300, .tol = 0.0, .restarts = 4};
  InductionOptions induction;
  RiskScoring scoring;
};

struct SweepEntry {
  Clustering clustering;
  InducedRuleSet best;
  std::vector<InducedRuleSet> candidates;  // decision list, decision tree
};

/// Standardizes features and clusters with k clusters.
Clustering cluster_profiles(std::span<const profiler::ClientProfile> profiles, int k,
                            const KMeansOptions& options);

/// Clustering plus both inductions and selection for each k.
std::vector<SweepEntry> sweep_k(std::span<const profiler::ClientProfile> profiles,
                                std::span<const int> k_range, const LearnOptions& options);

struct SegmentModel {
  ClientKind segment = ClientKind::SingularPerson;
  Clustering clustering;
  InducedRuleSet rules;
  ProfileClassification classification;
  ReclassTable reclass;
  std::string rationale;  // why this k
  double training_accuracy = 0;
};

SegmentModel learn_segment(std::span<const profiler::ClientProfile> profiles, ClientKind segment,
                           const LearnOptions& options, const Version& version);

struct ModelBundle {
  Version version;
  std::map<ClientKind, SegmentModel> segments;

  const SegmentModel& segment(ClientKind k) const;
};

/// Writes `<dir>/{singular,entity}_{clustering,rules,classification,reclass}.txt`.
void write_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);
ModelBundle read_bundle(const std::filesystem::path& dir);

/// Next free DDMMYYYY.SS for `date` given versions already present.
Version next_version(Date date, std::span<const Version> existing);

}  // namespace aml::learner
