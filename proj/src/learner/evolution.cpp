#include "aml/learner/evolution.hpp"

#include <algorithm>
#include <numeric>

namespace aml::learner {

namespace {

std::vector<double> to_vector(const Eigen::Matrix<double, 1, Eigen::Dynamic>& r) {
  return {r.data(), r.data() + r.size()};
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

EvolutionReport compare_cycles(const SegmentModel& model,
                               std::span<const profiler::ClientProfile> reference,
                               std::span<const profiler::ClientProfile> newer,
                               const EvolutionOptions& options) {
  EvolutionReport report;
  report.newer = newer.size();
  if (newer.size() < options.min_profiles) {
    report.insufficient = true;
    return report;
  }
  const Clustering& cl = model.clustering;
  const auto k = cl.centroids.rows();

  // reach of each cluster from its training members
  std::vector<double> reach(static_cast<std::size_t>(k), 0.0);
  {
    FeatureMatrix z = cl.standardizer.apply(feature_matrix(reference));
    auto labels = cl.labels_for(reference);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
      reach[c] = std::max(reach[c], (z.row(i) - cl.centroids.row(static_cast<Eigen::Index>(c))).norm());
    }
    for (auto& r : reach) r *= options.radius_factor;
  }

  FeatureMatrix z = cl.standardizer.apply(feature_matrix(newer));
  std::vector<Eigen::Index> inliers, outliers;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    bool covered = false;
    for (Eigen::Index c = 0; c < k && !covered; ++c)
      covered = (z.row(i) - cl.centroids.row(c)).norm() <= reach[static_cast<std::size_t>(c)];
    (covered ? inliers : outliers).push_back(i);
  }
  report.outliers = outliers.size();

  // uncovered groups
  DisjointSets sets(outliers.size());
  for (std::size_t a = 0; a < outliers.size(); ++a)
    for (std::size_t b = a + 1; b < outliers.size(); ++b)
      if ((z.row(outliers[a]) - z.row(outliers[b])).norm() <= options.link_distance) sets.unite(a, b);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t a = 0; a < outliers.size(); ++a) groups[sets.find(a)].push_back(a);
  for (const auto& [_, members] : groups) {
    if (members.size() < options.min_support) continue;
    ProfileDiff d;
    d.kind = ProfileDiff::Kind::NewProfile;
    Eigen::Matrix<double, 1, Eigen::Dynamic> mean = Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(z.cols());
    for (auto m : members) {
      mean += z.row(outliers[m]);
      d.members.push_back(newer[static_cast<std::size_t>(outliers[m])].key);
    }
    mean /= static_cast<double>(members.size());
    std::sort(d.members.begin(), d.members.end());
    double gap = std::numeric_limits<double>::max();
    for (Eigen::Index c = 0; c < k; ++c) gap = std::min(gap, (mean - cl.centroids.row(c)).norm());
    d.distance = gap;
    d.centroid = to_vector(mean);
    d.raw_centroid = to_vector(mean.cwiseProduct(cl.standardizer.scale) + cl.standardizer.mean);
    report.diffs.push_back(std::move(d));
  }

  // drift of the covered part
  if (!inliers.empty()) {
    FeatureMatrix zin(static_cast<Eigen::Index>(inliers.size()), z.cols());
    for (std::size_t i = 0; i < inliers.size(); ++i) zin.row(static_cast<Eigen::Index>(i)) = z.row(inliers[i]);
    KMeansOptions ko;
    ko.k = static_cast<int>(k);
    ko.max_iter = options.max_iter;
    auto run = kmeans_from(zin, FeatureMatrix(cl.centroids), ko);
    for (Eigen::Index c = 0; c < k; ++c) {
      double shift = (run.centroids.row(c) - cl.centroids.row(c)).norm();
      if (shift <= options.shift_threshold) continue;
      ProfileDiff d;
      d.kind = ProfileDiff::Kind::Shifted;
      d.cluster = static_cast<int>(c);
      d.distance = shift;
      Eigen::Matrix<double, 1, Eigen::Dynamic> row = run.centroids.row(c);
      d.centroid = to_vector(row);
      d.raw_centroid = to_vector(row.cwiseProduct(cl.standardizer.scale) + cl.standardizer.mean);
      report.diffs.push_back(std::move(d));
    }
  }
  return report;
}

SegmentModel apply_diffs(const SegmentModel& model, std::span<const ProfileDiff> accepted,
                         std::span<const ProfileClass> new_classes) {
  if (new_classes.size() != accepted.size())
    throw DomainError("apply_diffs: one class per accepted diff expected");
  SegmentModel out = model;
  auto& cl = out.clustering;
  const auto d = cl.centroids.cols();
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    const auto& diff = accepted[i];
    if (diff.centroid.size() != static_cast<std::size_t>(d))
      throw DomainError("apply_diffs: centroid dimension mismatch");
    Eigen::Map<const Eigen::Matrix<double, 1, Eigen::Dynamic>> row(diff.centroid.data(), d);
    if (diff.kind == ProfileDiff::Kind::Shifted) {
      if (diff.cluster < 0 || diff.cluster >= cl.k) throw DomainError("apply_diffs: no such cluster");
      cl.centroids.row(diff.cluster) = row;
      continue;
    }
    cl.centroids.conservativeResize(cl.k + 1, d);
    cl.centroids.row(cl.k) = row;
    ++cl.k;
    out.classification.mapping.push_back(new_classes[i]);
  }
  if (!accepted.empty()) out.rationale += "; evolved with " + std::to_string(accepted.size()) + " accepted change(s)";
  return out;
}

}  // namespace aml::learner
