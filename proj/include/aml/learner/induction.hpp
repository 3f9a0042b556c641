#pragma once

// Production-rule induction over labeled feature rows: a C4.5-style
// gain-ratio tree whose root-to-leaf paths become rules, and a PART-style
// separate-and-conquer decision list built from repeated partial trees.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aml/learner/kmeans.hpp"

namespace aml::learner {

using FeatureMatrix = RowMatrix<double>;

struct Condition {
  enum class Op : std::uint8_t { LessEq, Greater };
  int feature = 0;
  Op op = Op::LessEq;
  double threshold = 0;

  template <typename Row>
  bool holds(const Row& row) const {
    const double v = row(feature);
    return op == Op::LessEq ? v <= threshold : v > threshold;
  }
  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Conjunction of conditions predicting a label. No conditions = default rule.
struct ClassificationRule {
  std::vector<Condition> conditions;
  int label = 0;

  template <typename Row>
  bool matches(const Row& row) const {
    for (const auto& c : conditions)
      if (!c.holds(row)) return false;
    return true;
  }
  friend bool operator==(const ClassificationRule&, const ClassificationRule&) = default;
};

enum class InductionAlgorithm : std::uint8_t { DecisionList, DecisionTree };
std::string_view to_string(InductionAlgorithm a);

struct InducedRuleSet {
  InductionAlgorithm algorithm = InductionAlgorithm::DecisionList;
  std::vector<ClassificationRule> rules;
  std::size_t misclassified = 0;  // on the full training set
  std::string version;

  /// Index of the first rule matching the row. Tree rules are mutually
  /// exclusive, so first and only coincide there.
  template <typename Row>
  std::optional<std::size_t> fire(const Row& row) const {
    for (std::size_t i = 0; i < rules.size(); ++i)
      if (rules[i].matches(row)) return i;
    return std::nullopt;
  }

  template <typename Row>
  std::optional<int> classify(const Row& row) const {
    auto i = fire(row);
    if (!i) return std::nullopt;
    return rules[*i].label;
  }

  friend bool operator==(const InducedRuleSet&, const InducedRuleSet&) = default;
};

struct InductionOptions {
  int min_leaf = 2;
  double prune_fraction = 0.3;  // held out for reduced-error pruning
  std::uint64_t seed = 7;
  int max_depth = 24;
  int max_rules = 400;          // decision-list safety bound
  int min_prune_size = 20;      // below this, no hold-out split is made
};

/// Training-set replay: rows whose fired rule predicts a different label (or
/// no rule fires).
std::size_t count_misclassified(const InducedRuleSet& rules, const FeatureMatrix& x,
                                std::span<const int> labels);

/// Gain-ratio tree grown on a seeded split, reduced-error pruned on the
/// held-out part, then thresholds and leaf labels refitted on all rows.
InducedRuleSet induce_decision_tree(const FeatureMatrix& x, std::span<const int> labels,
                                    const InductionOptions& options = {});

/// Separate-and-conquer: each round builds a pruned tree on the uncovered
/// rows and keeps its largest leaf as the next rule. A final default rule
/// gives total coverage.
InducedRuleSet induce_decision_list(const FeatureMatrix& x, std::span<const int> labels,
                                    const InductionOptions& options = {});

/// Fewest misclassified; ties go to fewer rules, then DecisionList.
/// Throws DomainError on an empty candidate list.
const InducedRuleSet& select_best(std::span<const InducedRuleSet> candidates);

/// "f3 <= 12.5 AND f7 > 0 -> 2" using the given feature names.
std::string describe(const ClassificationRule& rule, std::span<const std::string> feature_names);

}  // namespace aml::learner
