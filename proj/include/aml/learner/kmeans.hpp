#pragma once

// Lloyd's k-means with k-means++ seeding over dense Eigen matrices.
// Rows are points, columns are features.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "aml/core.hpp"

namespace aml::learner {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KMeansOptions {
  int k = 2;
  std::uint64_t seed = 1;
  int max_iter = 300;
  double tol = 0.0;
  int restarts = 1;  // independent seedings, the lowest inertia wins
};

template <typename Scalar>
struct KMeansResult {
  RowMatrix<Scalar> centroids;           // k x d
  std::vector<int> assignment;           // cluster per point
  Scalar inertia = 0;                    // sum of squared distances
  std::vector<Scalar> inertia_history;   // after every assignment step
  int iterations = 0;
  bool converged = false;
};

/// Uniform double in [0, 1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace detail {

template <typename Derived>
Eigen::Index count_distinct_rows(const Eigen::MatrixBase<Derived>& x) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(a, c) < x(b, c)) return true;
      if (x(b, c) < x(a, c)) return false;
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), row_less);
  Eigen::Index distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (row_less(idx[i - 1], idx[i])) ++distinct;
  return distinct;
}

template <typename Scalar, typename Derived>
RowMatrix<Scalar> seed_plus_plus(const Eigen::MatrixBase<Derived>& x, int k,
                                 std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  RowMatrix<Scalar> c(k, x.cols());
  auto first = static_cast<Eigen::Index>(unit_uniform(rng) * static_cast<double>(n));
  c.row(0) = x.row(std::min(first, n - 1));
  std::vector<Scalar> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - c.row(0)).squaredNorm();
  for (int j = 1; j < k; ++j) {
    Scalar total = std::accumulate(d2.begin(), d2.end(), Scalar{0});
    Eigen::Index pick = n - 1;
    if (total > 0) {
      Scalar target = static_cast<Scalar>(unit_uniform(rng)) * total;
      Scalar run = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        run += d2[i];
        if (run > target && d2[i] > 0) {
          pick = i;
          break;
        }
      }
    }
    c.row(j) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], Scalar((x.row(i) - c.row(j)).squaredNorm()));
  }
  return c;
}

/// Nearest centroid per point (ties to the lowest index). Returns whether
/// any assignment changed and accumulates the inertia.
template <typename Scalar, typename Derived>
bool assign(const Eigen::MatrixBase<Derived>& x, const RowMatrix<Scalar>& c,
            std::vector<int>& assignment, std::vector<Scalar>& dist, Scalar& inertia) {
  bool changed = false;
  inertia = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    Scalar best_d = std::numeric_limits<Scalar>::max();
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      Scalar d = (x.row(i) - c.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (assignment[i] != best) changed = true;
    assignment[i] = best;
    dist[i] = best_d;
    inertia += best_d;
  }
  return changed;
}

/// Centroids become member means. An empty cluster is re-seeded from the
/// point farthest from its current centroid. Returns the largest shift.
template <typename Scalar, typename Derived>
Scalar update(const Eigen::MatrixBase<Derived>& x, RowMatrix<Scalar>& c,
              std::vector<int>& assignment, std::vector<Scalar>& dist, bool& reseeded) {
  reseeded = false;
  const Eigen::Index k = c.rows();
  RowMatrix<Scalar> sums = RowMatrix<Scalar>::Zero(k, x.cols());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(assignment[i]) += x.row(i);
    ++counts[assignment[i]];
  }
  Scalar shift = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> next;
    if (counts[j] > 0) {
      next = sums.row(j) / static_cast<Scalar>(counts[j]);
    } else {
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (counts[assignment[i]] > 1 && (far < 0 || dist[i] > dist[far])) far = i;
      if (far < 0) continue;
      --counts[assignment[far]];
      assignment[far] = static_cast<int>(j);
      counts[j] = 1;
      dist[far] = 0;
      next = x.row(far);
      reseeded = true;
    }
    shift = std::max(shift, Scalar((next - c.row(j)).norm()));
    c.row(j) = next;
  }
  return shift;
}

template <typename Scalar, typename Derived>
KMeansResult<Scalar> lloyd(const Eigen::MatrixBase<Derived>& x, RowMatrix<Scalar> centroids,
                           const KMeansOptions& opt) {
  KMeansResult<Scalar> r;
  const auto n = static_cast<std::size_t>(x.rows());
  r.assignment.assign(n, -1);
  std::vector<Scalar> dist(n);
  Scalar inertia = 0;
  assign(x, centroids, r.assignment, dist, inertia);
  r.inertia_history.push_back(inertia);
  while (r.iterations < opt.max_iter) {
    ++r.iterations;
    bool reseeded = false;
    Scalar shift = update(x, centroids, r.assignment, dist, reseeded);
    bool changed = assign(x, centroids, r.assignment, dist, inertia) || reseeded;
    r.inertia_history.push_back(inertia);
    if (!changed) {
      r.converged = true;
      break;
    }
    if (shift < static_cast<Scalar>(opt.tol)) {
      // centroids have settled; finish with means of the final assignment
      update(x, centroids, r.assignment, dist, reseeded);
      r.converged = true;
      break;
    }
  }
  r.centroids = std::move(centroids);
  r.inertia = inertia;
  return r;
}

}  // namespace detail

/// Throws DomainError unless 2 <= k <= number of distinct points.
template <typename Derived>
KMeansResult<typename Derived::Scalar> kmeans(const Eigen::MatrixBase<Derived>& points,
                                              const KMeansOptions& opt) {
  using Scalar = typename Derived::Scalar;
  if (opt.k < 2) throw DomainError("kmeans: k must be at least 2");
  if (detail::count_distinct_rows(points) < opt.k)
    throw DomainError("kmeans: k exceeds the number of distinct points");

  KMeansResult<Scalar> best;
  bool have = false;
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    std::mt19937_64 rng(opt.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r));
    auto seeds = detail::seed_plus_plus<Scalar>(points, opt.k, rng);
    auto run = detail::lloyd<Scalar>(points, std::move(seeds), opt);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  return best;
}

/// Lloyd iterations from given centroids (no seeding, k may be 1).
template <typename Derived>
KMeansResult<typename Derived::Scalar> kmeans_from(
    const Eigen::MatrixBase<Derived>& points,
    RowMatrix<typename Derived::Scalar> initial, const KMeansOptions& opt) {
  return detail::lloyd<typename Derived::Scalar>(points, std::move(initial), opt);
}

/// Sum of squared distances of points to the means of their groups.
template <typename Derived>
typename Derived::Scalar partition_inertia(const Eigen::MatrixBase<Derived>& x,
                                           const std::vector<int>& assignment, int k) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> sums = RowMatrix<Scalar>::Zero(k, x.cols());
  std::vector<Scalar> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(assignment[i]) += x.row(i);
    counts[assignment[i]] += 1;
  }
  Scalar total = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto mean = sums.row(assignment[i]) / counts[assignment[i]];
    total += (x.row(i) - mean).squaredNorm();
  }
  return total;
}

}  // namespace aml::learner
