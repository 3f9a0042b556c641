#pragma once

// Comparing a newer cycle against the current profile base: behavior groups
// the base does not cover, and clusters whose centroid moved.

#include <span>
#include <string>
#include <vector>

#include "aml/learner/pipeline.hpp"

namespace aml::learner {

struct EvolutionOptions {
  std::size_t min_profiles = 50;   // fewer newer profiles: nothing to say
  std::size_t min_support = 5;     // smallest uncovered group worth reporting
  double link_distance = 1.0;      // standardized units; groups are linked within it
  double radius_factor = 1.0;      // cluster reach = factor * farthest training member
  double shift_threshold = 0.5;    // standardized units
  int max_iter = 300;
};

struct ProfileDiff {
  enum class Kind : std::uint8_t { NewProfile, Shifted };
  Kind kind = Kind::NewProfile;
  int cluster = -1;               // Shifted only
  std::vector<double> centroid;   // standardized
  std::vector<double> raw_centroid;
  std::vector<AccountKey> members;  // NewProfile only, sorted
  double distance = 0;            // shift, or gap to the nearest current centroid
};

struct EvolutionReport {
  bool insufficient = false;
  std::size_t newer = 0;
  std::size_t outliers = 0;
  std::vector<ProfileDiff> diffs;  // new profiles first, then shifts by cluster
};

/// `reference` holds the profiles the segment model was trained on; their
/// distances set each cluster's reach. Newer profiles outside every reach
/// are grouped by single linkage; groups of at least min_support become new
/// profiles. The rest re-run Lloyd from the current centroids and moves
/// beyond shift_threshold are reported.
EvolutionReport compare_cycles(const SegmentModel& model,
                               std::span<const profiler::ClientProfile> reference,
                               std::span<const profiler::ClientProfile> newer,
                               const EvolutionOptions& options = {});

/// Applies accepted diffs: new profiles append a centroid mapped to
/// `new_class`, shifts replace a centroid. Rules and the reclassification
/// table stay as learned. The clustering assignment is kept.
SegmentModel apply_diffs(const SegmentModel& model, std::span<const ProfileDiff> accepted,
                         std::span<const ProfileClass> new_classes);

}  // namespace aml::learner
