#include "igrec/preprocess/candidates.hpp"

#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"

namespace igrec::prep {

std::vector<std::string> CandidateSet::ids() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& c : items) out.push_back(c.garment_id);
  return out;
}

std::size_t CandidateSet::action_for_cluster(std::size_t cluster) const {
  for (std::size_t a = 0; a < items.size(); ++a) {
    if (items[a].cluster == cluster) return a;
  }
  return items.size();
}

std::uint64_t CandidateSet::hash() const {
  std::string bytes;
  for (const auto& c : items) {
    bytes += c.garment_id;
    bytes += '\x1f';
    bytes += std::to_string(c.cluster);
    bytes += '\x1e';
  }
  return io::fnv1a64(bytes);
}

CandidateSet select_medoids(const Eigen::MatrixXd& centroids, const std::vector<std::size_t>& assignment,
                            const Eigen::MatrixXd& latents, const std::vector<std::string>& ids) {
  if (assignment.size() != ids.size() || static_cast<std::size_t>(latents.cols()) != ids.size()) {
    throw ShapeError("select_medoids: assignment, latents and ids disagree in length");
  }
  if (latents.rows() != centroids.rows()) throw ShapeError("select_medoids: latent and centroid dims differ");
  const auto k = static_cast<std::size_t>(centroids.cols());
  std::vector<std::size_t> best(k, ids.size());
  std::vector<double> best_d(k, std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < ids.size(); ++p) {
    const std::size_t c = assignment[p];
    if (c >= k) throw ContractError("select_medoids: cluster index out of range for " + ids[p]);
    const double d = (latents.col(static_cast<Eigen::Index>(p)) - centroids.col(static_cast<Eigen::Index>(c))).squaredNorm();
    if (d < best_d[c] || (d == best_d[c] && ids[p] < ids[best[c]])) {
      best_d[c] = d;
      best[c] = p;
    }
  }
  CandidateSet out;
  for (std::size_t c = 0; c < k; ++c) {
    if (best[c] != ids.size()) out.items.push_back({ids[best[c]], c});
  }
  return out;
}

Clustering cluster_bottoms(const Eigen::MatrixXd& latents, const std::vector<std::string>& ids,
                           const KMeansConfig& config) {
  const KMeansResult result = kmeans(latents, config);
  Clustering out;
  out.k = config.k;
  out.seed = config.seed;
  out.centroids = result.centroids;
  for (std::size_t p = 0; p < ids.size(); ++p) out.assignment[ids[p]] = result.assignment[p];
  out.candidates = select_medoids(result.centroids, result.assignment, latents, ids);
  return out;
}

void save_clustering(const Clustering& clustering, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json medoids = nlohmann::json::array();
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : clustering.candidates.items) {
    medoids.push_back(c.garment_id);
    clusters.push_back(c.cluster);
  }
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, c] : clustering.assignment) assignment[id] = c;
  const nlohmann::json doc = {{"k", clustering.k},
                              {"seed", clustering.seed},
                              {"latent_dim", clustering.centroids.rows()},
                              {"medoids", medoids},
                              {"clusters", clusters},
                              {"assignment", assignment},
                              {"candidate_hash", io::hex64(clustering.candidates.hash())}};
  io::write_text_file(dir / kClusteringFile, doc.dump(2));
  io::save_f32_matrix(dir / kCentroidsFile, clustering.centroids);
}

Clustering load_clustering(const std::filesystem::path& dir) {
  const auto path = dir / kClusteringFile;
  try {
    const auto doc = nlohmann::json::parse(io::read_text_file(path));
    Clustering out;
    out.k = doc.at("k").get<std::size_t>();
    out.seed = doc.at("seed").get<std::uint64_t>();
    const auto latent_dim = doc.at("latent_dim").get<std::size_t>();
    const auto& medoids = doc.at("medoids");
    const auto& clusters = doc.at("clusters");
    if (medoids.size() != clusters.size()) throw LoadError("medoids and clusters differ in length");
    std::set<std::string> seen;
    for (std::size_t a = 0; a < medoids.size(); ++a) {
      Candidate c{medoids[a].get<std::string>(), clusters[a].get<std::size_t>()};
      if (c.cluster >= out.k) throw LoadError("cluster index out of range for medoid " + c.garment_id);
      if (!seen.insert(c.garment_id).second) throw LoadError("duplicate medoid " + c.garment_id);
      out.candidates.items.push_back(std::move(c));
    }
    for (const auto& [id, c] : doc.at("assignment").items()) {
      out.assignment[id] = c.get<std::size_t>();
      if (out.assignment[id] >= out.k) throw LoadError("cluster index out of range for " + id);
    }
    if (doc.contains("candidate_hash") && doc["candidate_hash"].get<std::string>() != io::hex64(out.candidates.hash())) {
      throw LoadError("candidate_hash does not match the medoid list");
    }
    out.centroids = io::load_f32_matrix(dir / kCentroidsFile, out.k, latent_dim);
    return out;
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace igrec::prep
