#pragma once

// Brute force references for two-cluster k-means on tiny inputs.

#include <limits>
#include <random>
#include <vector>

#include "aml/learner/kmeans.hpp"

namespace aml::test {

using Mat = learner::RowMatrix<double>;

// brute force over every split of the rows into two non-empty groups
inline double best_two_partition(const Mat& x) {
  const int n = static_cast<int>(x.rows());
  double best = std::numeric_limits<double>::max();
  for (unsigned mask = 1; mask < (1u << n) - 1; ++mask) {
    std::vector<int> a(n);
    for (int i = 0; i < n; ++i) a[i] = (mask >> i) & 1;
    best = std::min(best, learner::partition_inertia(x, a, 2));
  }
  return best;
}

inline bool is_lloyd_fixed_point(const Mat& x, const learner::KMeansResult<double>& r) {
  const auto k = r.centroids.rows();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index nearest = 0;
    double best = std::numeric_limits<double>::max();
    for (Eigen::Index j = 0; j < k; ++j) {
      double d = (x.row(i) - r.centroids.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    if (nearest != r.assignment[i]) return false;
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(x.cols());
    int count = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (r.assignment[i] == j) {
        sum += x.row(i);
        ++count;
      }
    if (count == 0) return false;
    if (((sum / count) - r.centroids.row(j)).norm() > 1e-9) return false;
  }
  return true;
}

inline Mat random_points(std::mt19937_64& rng, int n, int d) {
  std::uniform_real_distribution<double> u(-5, 5);
  Mat x(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) x(i, c) = std::round(u(rng) * 4) / 4;  // grid values give ties too
  return x;
}

// two tight groups far apart
inline Mat separable_points(std::mt19937_64& rng, int n, int d) {
  std::uniform_real_distribution<double> u(0, 0.5);
  Mat x(n, d);
  int split = 1 + static_cast<int>(rng() % static_cast<unsigned>(n - 1));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) x(i, c) = u(rng) + (i < split ? 0.0 : 20.0);
  return x;
}

}  // namespace aml::test
