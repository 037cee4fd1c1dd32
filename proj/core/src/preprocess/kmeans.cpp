#include "igrec/preprocess/kmeans.hpp"

#include <limits>

#include "igrec/common/error.hpp"
#include "igrec/common/rng.hpp"

namespace igrec::prep {
namespace {

double squared_distance(const Eigen::MatrixXd& points, Eigen::Index p, const Eigen::MatrixXd& centroids,
                        Eigen::Index c) {
  return (points.col(p) - centroids.col(c)).squaredNorm();
}

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& points, std::size_t k, Rng& rng) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd centroids(points.rows(), static_cast<Eigen::Index>(k));
  centroids.col(0) = points.col(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  std::vector<double> nearest(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) nearest[static_cast<std::size_t>(p)] = squared_distance(points, p, centroids, 0);

  for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(k); ++c) {
    double total = 0.0;
    for (double d : nearest) total += d;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      // D^2 sampling: pick p with probability nearest[p] / total.
      const double target = rng.uniform() * total;
      double running = 0.0;
      chosen = n - 1;
      for (Eigen::Index p = 0; p < n; ++p) {
        running += nearest[static_cast<std::size_t>(p)];
        if (running > target && nearest[static_cast<std::size_t>(p)] > 0.0) {
          chosen = p;
          break;
        }
      }
    } else {
      chosen = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    centroids.col(c) = points.col(chosen);
    for (Eigen::Index p = 0; p < n; ++p) {
      auto& d = nearest[static_cast<std::size_t>(p)];
      d = std::min(d, squared_distance(points, p, centroids, c));
    }
  }
  return centroids;
}

}  // namespace

double within_cluster_sse(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                          const std::vector<std::size_t>& assignment) {
  double sse = 0.0;
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    sse += squared_distance(points, p, centroids, static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(p)]));
  }
  return sse;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansConfig& config) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (config.k == 0) throw ContractError("k must be positive");
  if (config.k > n) {
    throw ContractError("k = " + std::to_string(config.k) + " exceeds the number of points (" + std::to_string(n) + ")");
  }
  Rng rng(config.seed);
  KMeansResult result;
  result.centroids = seed_plus_plus(points, config.k, rng);
  result.assignment.assign(n, std::numeric_limits<std::size_t>::max());
  const auto k = static_cast<Eigen::Index>(config.k);

  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    bool changed = false;
    std::vector<std::size_t> counts(config.k, 0);
    std::vector<double> own_distance(n);
    // Assignment step: independent per point, so any parallel schedule gives the same result.
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = squared_distance(points, static_cast<Eigen::Index>(p), result.centroids, c);
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::size_t>(c);
        }
      }
      changed |= result.assignment[p] != best;
      result.assignment[p] = best;
      own_distance[p] = best_d;
      ++counts[best];
    }

    for (std::size_t c = 0; c < config.k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t farthest = 0;
      double farthest_d = -1.0;
      for (std::size_t p = 0; p < n; ++p) {
        if (counts[result.assignment[p]] > 1 && own_distance[p] > farthest_d) {
          farthest_d = own_distance[p];
          farthest = p;
        }
      }
      --counts[result.assignment[farthest]];
      result.assignment[farthest] = c;
      counts[c] = 1;
      own_distance[farthest] = 0.0;
      changed = true;
    }

    // Update step.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    for (std::size_t p = 0; p < n; ++p) sums.col(static_cast<Eigen::Index>(result.assignment[p])) += points.col(static_cast<Eigen::Index>(p));
    for (Eigen::Index c = 0; c < k; ++c) {
      result.centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    result.sse_trace.push_back(within_cluster_sse(points, result.centroids, result.assignment));
    result.iterations = iter + 1;
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace igrec::prep
