#include "aml/learner/induction.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

namespace aml::learner {

namespace {

struct Node {
  bool leaf = true;
  int label = 0;
  int feature = -1;
  double threshold = 0;
  std::unique_ptr<Node> left;   // feature <= threshold
  std::unique_ptr<Node> right;  // feature > threshold
};

double entropy(const std::vector<std::size_t>& counts, std::size_t n) {
  if (n == 0) return 0;
  double h = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

double split_info(std::size_t nl, std::size_t nr) {
  const double n = static_cast<double>(nl + nr);
  double s = 0;
  for (auto m : {nl, nr}) {
    if (m == 0) continue;
    double p = static_cast<double>(m) / n;
    s -= p * std::log2(p);
  }
  return s;
}

struct Candidate {
  int feature = -1;
  double threshold = 0;
  double gain = 0;
  double ratio = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const int> labels, int classes,
              const InductionOptions& opt)
      : x_(x), y_(labels), classes_(classes), opt_(opt) {}

  std::unique_ptr<Node> build(const std::vector<int>& rows, std::uint64_t seed) {
    std::vector<int> grow_rows = rows, prune_rows;
    if (static_cast<int>(rows.size()) >= opt_.min_prune_size && opt_.prune_fraction > 0) {
      std::mt19937_64 rng(seed);
      for (std::size_t i = grow_rows.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
        std::swap(grow_rows[i - 1], grow_rows[std::min(j, i - 1)]);
      }
      auto cut = static_cast<std::size_t>(
          std::round(static_cast<double>(grow_rows.size()) * opt_.prune_fraction));
      prune_rows.assign(grow_rows.end() - static_cast<std::ptrdiff_t>(cut), grow_rows.end());
      grow_rows.resize(grow_rows.size() - cut);
      std::sort(grow_rows.begin(), grow_rows.end());
      std::sort(prune_rows.begin(), prune_rows.end());
    }
    auto root = grow(grow_rows, 0);
    if (!prune_rows.empty()) prune(*root, prune_rows);
    refit(*root, rows);
    return root;
  }

  int majority(const std::vector<int>& rows) const {
    auto c = counts(rows);
    return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
  }

 private:
  std::vector<std::size_t> counts(const std::vector<int>& rows) const {
    std::vector<std::size_t> c(static_cast<std::size_t>(classes_), 0);
    for (int r : rows) ++c[static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])];
    return c;
  }

  /// Best information-gain threshold on one feature.
  std::optional<Candidate> best_threshold(const std::vector<int>& rows, int feature,
                                          std::size_t min_leaf,
                                          const std::vector<std::size_t>& parent_counts) const {
    const std::size_t n = rows.size();
    std::vector<std::pair<double, int>> v;
    v.reserve(n);
    for (int r : rows) v.emplace_back(x_(r, feature), y_[static_cast<std::size_t>(r)]);
    std::sort(v.begin(), v.end());
    const double parent_h = entropy(parent_counts, n);
    std::vector<std::size_t> left(static_cast<std::size_t>(classes_), 0);
    std::vector<std::size_t> right = parent_counts;
    std::optional<Candidate> best;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      ++left[static_cast<std::size_t>(v[i].second)];
      --right[static_cast<std::size_t>(v[i].second)];
      if (!(v[i].first < v[i + 1].first)) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = parent_h - (static_cast<double>(nl) * entropy(left, nl) +
                                      static_cast<double>(nr) * entropy(right, nr)) /
                                         static_cast<double>(n);
      if (!best || gain > best->gain + 1e-12) {
        double mid = 0.5 * (v[i].first + v[i + 1].first);
        if (!(mid < v[i + 1].first)) mid = v[i].first;
        best = Candidate{feature, mid, gain, gain / split_info(nl, nr)};
      }
    }
    return best;
  }

  std::unique_ptr<Node> grow(const std::vector<int>& rows, int depth) {
    auto node = std::make_unique<Node>();
    auto c = counts(rows);
    node->label = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
    const auto n = rows.size();
    const auto min_leaf = static_cast<std::size_t>(std::max(1, opt_.min_leaf));
    const bool pure = std::count_if(c.begin(), c.end(), [](auto v) { return v > 0; }) <= 1;
    if (pure || n < 2 * min_leaf || depth >= opt_.max_depth) return node;

    std::vector<Candidate> cands;
    for (int f = 0; f < x_.cols(); ++f)
      if (auto cand = best_threshold(rows, f, min_leaf, c); cand && cand->gain > 1e-12)
        cands.push_back(*cand);
    if (cands.empty()) return node;

    // C4.5: best gain ratio among splits with at least average gain
    double avg = 0;
    for (auto& k : cands) avg += k.gain;
    avg /= static_cast<double>(cands.size());
    const Candidate* pick = nullptr;
    for (auto& k : cands)
      if (k.gain >= avg - 1e-12 && (!pick || k.ratio > pick->ratio + 1e-12)) pick = &k;

    std::vector<int> l, r;
    for (int row : rows) (x_(row, pick->feature) <= pick->threshold ? l : r).push_back(row);
    node->leaf = false;
    node->feature = pick->feature;
    node->threshold = pick->threshold;
    node->left = grow(l, depth + 1);
    node->right = grow(r, depth + 1);
    return node;
  }

  /// Reduced-error pruning; returns hold-out errors of the (pruned) subtree.
  std::size_t prune(Node& node, const std::vector<int>& rows) {
    std::size_t leaf_err = 0;
    for (int r : rows)
      if (y_[static_cast<std::size_t>(r)] != node.label) ++leaf_err;
    if (node.leaf) return leaf_err;
    std::vector<int> l, r;
    for (int row : rows) (x_(row, node.feature) <= node.threshold ? l : r).push_back(row);
    std::size_t sub = prune(*node.left, l) + prune(*node.right, r);
    if (leaf_err <= sub) {
      node.leaf = true;
      node.left.reset();
      node.right.reset();
      return leaf_err;
    }
    return sub;
  }

  /// Keeps the pruned structure but re-estimates labels on every row
  /// reaching each node, and re-centers each threshold in the gap it falls
  /// in. Moving a cut to another gap could empty a subtree further down.
  void refit(Node& node, const std::vector<int>& rows) {
    if (rows.empty()) return;
    node.label = majority(rows);
    if (node.leaf) return;
    std::optional<double> lo, hi;
    for (int row : rows) {
      const double v = x_(row, node.feature);
      if (v <= node.threshold) {
        if (!lo || v > *lo) lo = v;
      } else if (!hi || v < *hi) {
        hi = v;
      }
    }
    if (lo && hi) {
      double mid = 0.5 * (*lo + *hi);
      node.threshold = mid < *hi ? mid : *lo;
    }
    std::vector<int> l, r;
    for (int row : rows) (x_(row, node.feature) <= node.threshold ? l : r).push_back(row);
    refit(*node.left, l);
    refit(*node.right, r);
  }

  const FeatureMatrix& x_;
  std::span<const int> y_;
  int classes_;
  InductionOptions opt_;
};

std::vector<Condition> simplify(const std::vector<Condition>& path) {
  std::vector<Condition> out;
  for (const auto& c : path) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Condition& o) {
      return o.feature == c.feature && o.op == c.op;
    });
    if (it == out.end()) {
      out.push_back(c);
    } else if (c.op == Condition::Op::LessEq) {
      it->threshold = std::min(it->threshold, c.threshold);
    } else {
      it->threshold = std::max(it->threshold, c.threshold);
    }
  }
  return out;
}

void collect_rules(const Node& node, std::vector<Condition>& path,
                   std::vector<ClassificationRule>& out) {
  if (node.leaf) {
    out.push_back({simplify(path), node.label});
    return;
  }
  path.push_back({node.feature, Condition::Op::LessEq, node.threshold});
  collect_rules(*node.left, path, out);
  path.back().op = Condition::Op::Greater;
  collect_rules(*node.right, path, out);
  path.pop_back();
}

int class_count(std::span<const int> labels) {
  int m = -1;
  for (int l : labels) {
    if (l < 0) throw DomainError("rule induction: labels must be non-negative");
    m = std::max(m, l);
  }
  return m + 1;
}

void check_shapes(const FeatureMatrix& x, std::span<const int> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw DomainError("rule induction: feature rows and labels differ in length");
  if (labels.empty()) throw DomainError("rule induction: empty training set");
}

}  // namespace

std::string_view to_string(InductionAlgorithm a) {
  return a == InductionAlgorithm::DecisionList ? "DecisionList" : "DecisionTree";
}

std::size_t count_misclassified(const InducedRuleSet& rules, const FeatureMatrix& x,
                                std::span<const int> labels) {
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto c = rules.classify(x.row(i));
    if (!c || *c != labels[static_cast<std::size_t>(i)]) ++wrong;
  }
  return wrong;
}

InducedRuleSet induce_decision_tree(const FeatureMatrix& x, std::span<const int> labels,
                                    const InductionOptions& options) {
  check_shapes(x, labels);
  TreeBuilder builder(x, labels, class_count(labels), options);
  std::vector<int> rows(labels.size());
  std::iota(rows.begin(), rows.end(), 0);
  auto root = builder.build(rows, options.seed);

  InducedRuleSet out;
  out.algorithm = InductionAlgorithm::DecisionTree;
  std::vector<Condition> path;
  collect_rules(*root, path, out.rules);
  out.misclassified = count_misclassified(out, x, labels);
  return out;
}

InducedRuleSet induce_decision_list(const FeatureMatrix& x, std::span<const int> labels,
                                    const InductionOptions& options) {
  check_shapes(x, labels);
  const int classes = class_count(labels);
  TreeBuilder builder(x, labels, classes, options);

  InducedRuleSet out;
  out.algorithm = InductionAlgorithm::DecisionList;
  std::vector<int> remaining(labels.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  const int overall_majority = builder.majority(remaining);

  std::uint64_t round = 0;
  while (!remaining.empty() && static_cast<int>(out.rules.size()) < options.max_rules) {
    const int first = labels[static_cast<std::size_t>(remaining.front())];
    if (std::all_of(remaining.begin(), remaining.end(),
                    [&](int r) { return labels[static_cast<std::size_t>(r)] == first; }))
      break;

    auto root = builder.build(remaining, options.seed + 0x9e3779b97f4a7c15ULL * ++round);
    if (root->leaf) break;

    std::vector<ClassificationRule> leaves;
    std::vector<Condition> path;
    collect_rules(*root, path, leaves);
    std::size_t best = 0, best_cov = 0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      std::size_t cov = 0;
      for (int r : remaining)
        if (leaves[li].matches(x.row(r))) ++cov;
      if (cov > best_cov) {
        best_cov = cov;
        best = li;
      }
    }
    if (best_cov == 0) break;

    ClassificationRule rule = leaves[best];
    std::vector<int> covered, rest;
    for (int r : remaining) (rule.matches(x.row(r)) ? covered : rest).push_back(r);
    rule.label = builder.majority(covered);
    out.rules.push_back(std::move(rule));
    remaining = std::move(rest);
  }

  const int default_label = remaining.empty() ? overall_majority : builder.majority(remaining);
  out.rules.push_back({{}, default_label});
  out.misclassified = count_misclassified(out, x, labels);
  return out;
}

const InducedRuleSet& select_best(std::span<const InducedRuleSet> candidates) {
  if (candidates.empty()) throw DomainError("select_best: no candidates");
  const InducedRuleSet* best = &candidates.front();
  auto better = [](const InducedRuleSet& a, const InducedRuleSet& b) {
    if (a.misclassified != b.misclassified) return a.misclassified < b.misclassified;
    if (a.rules.size() != b.rules.size()) return a.rules.size() < b.rules.size();
    return a.algorithm == InductionAlgorithm::DecisionList &&
           b.algorithm == InductionAlgorithm::DecisionTree;
  };
  for (const auto& c : candidates.subspan(1))
    if (better(c, *best)) best = &c;
  return *best;
}

std::string describe(const ClassificationRule& rule, std::span<const std::string> names) {
  std::ostringstream os;
  if (rule.conditions.empty()) os << "TRUE";
  for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
    const auto& c = rule.conditions[i];
    if (i) os << " AND ";
    auto f = static_cast<std::size_t>(c.feature);
    os << (f < names.size() ? names[f] : "f" + std::to_string(f))
       << (c.op == Condition::Op::LessEq ? " <= " : " > ") << format_double(c.threshold);
  }
  os << " -> " << rule.label;
  return os.str();
}

}  // namespace aml::learner
