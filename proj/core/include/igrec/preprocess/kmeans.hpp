#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace igrec::prep {

struct KMeansConfig {
  std::size_t k = 30;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
};

/// Lloyd's algorithm result over column-stacked points.
struct KMeansResult {
  Eigen::MatrixXd centroids;           // dim x k
  std::vector<std::size_t> assignment; // per point, cluster index
  std::vector<double> sse_trace;       // within-cluster SSE after each iteration
  std::size_t iterations = 0;
  bool converged = false;
};

/// k-means++ seeding followed by Lloyd iterations until assignments stop
/// changing or `max_iters` is reached. Assignment ties go to the lowest cluster
/// index. A cluster left empty by an assignment step is re-seeded at the point
/// farthest from its current centroid, which then forms that cluster alone.
/// Throws ContractError when k == 0 or k > number of points.
KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansConfig& config);

/// Sum of squared Euclidean distances of each point to its assigned centroid.
double within_cluster_sse(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                          const std::vector<std::size_t>& assignment);

}  // namespace igrec::prep
