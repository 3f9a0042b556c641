#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "aml/learner/induction.hpp"
#include "aml/learner/kmeans.hpp"
#include "aml/profiler.hpp"

namespace aml::learner {

/// Account age followed by the annual totals of the eleven attributes.
inline constexpr std::size_t kFeatureCount = 1 + profiler::kAttributeCount;

const std::vector<std::string>& feature_names();

Eigen::Matrix<double, 1, Eigen::Dynamic> feature_row(const profiler::ClientProfile& p);
FeatureMatrix feature_matrix(std::span<const profiler::ClientProfile> profiles);

/// Per-column z-score. Constant columns keep scale 1.
struct Standardizer {
  Eigen::Matrix<double, 1, Eigen::Dynamic> mean;
  Eigen::Matrix<double, 1, Eigen::Dynamic> scale;

  static Standardizer fit(const FeatureMatrix& x);

  template <typename Derived>
  FeatureMatrix apply(const Eigen::MatrixBase<Derived>& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// A clustering of one segment: centroids live in standardized space.
struct Clustering {
  int k = 0;
  Standardizer standardizer;
  FeatureMatrix centroids;
  std::map<AccountKey, int> assignment;
  double inertia = 0;

  /// Nearest centroid of a raw feature row.
  int nearest(const Eigen::Matrix<double, 1, Eigen::Dynamic>& raw) const;
  /// Labels in the order of `profiles`. Throws NotFoundError for accounts
  /// outside the assignment.
  std::vector<int> labels_for(std::span<const profiler::ClientProfile> profiles) const;
};

}  // namespace aml::learner
