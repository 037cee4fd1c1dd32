#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igrec/preprocess/kmeans.hpp"

namespace igrec::prep {

struct Candidate {
  std::string garment_id;
  std::size_t cluster = 0;
};

/// The agent's action space. The index into `items` is the action id.
struct CandidateSet {
  std::vector<Candidate> items;

  std::size_t size() const { return items.size(); }
  const std::string& id(std::size_t action) const { return items.at(action).garment_id; }
  std::vector<std::string> ids() const;

  /// Action whose medoid represents `cluster`, or size() when that cluster has none.
  std::size_t action_for_cluster(std::size_t cluster) const;

  /// Hash over the ordered ids and clusters; used to check artifacts agree.
  std::uint64_t hash() const;
};

/// Bottoms grouped into clusters over their latent codes.
struct Clustering {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd centroids;                     // latent_dim x k
  std::map<std::string, std::size_t> assignment;  // garment id -> cluster
  CandidateSet candidates;
};

/// For each nonempty cluster, the member nearest its centroid (ties: smaller id).
/// `latents` columns correspond to `ids`. Candidates are ordered by cluster index.
CandidateSet select_medoids(const Eigen::MatrixXd& centroids, const std::vector<std::size_t>& assignment,
                            const Eigen::MatrixXd& latents, const std::vector<std::string>& ids);

/// Runs k-means on `latents` and selects medoids.
Clustering cluster_bottoms(const Eigen::MatrixXd& latents, const std::vector<std::string>& ids,
                           const KMeansConfig& config);

inline constexpr const char* kClusteringFile = "clustering.json";
inline constexpr const char* kCentroidsFile = "centroids.f32";

/// clustering.json {k, seed, latent_dim, medoids, clusters, assignment} plus centroids.f32.
void save_clustering(const Clustering& clustering, const std::filesystem::path& dir);
Clustering load_clustering(const std::filesystem::path& dir);

}  // namespace igrec::prep
