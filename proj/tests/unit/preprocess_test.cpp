#include <algorithm>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "igrec/common/error.hpp"
#include "igrec/common/rng.hpp"
#include "igrec/nn/gradcheck.hpp"
#include "igrec/preprocess/autoencoder.hpp"
#include "igrec/preprocess/candidates.hpp"
#include "igrec/preprocess/kmeans.hpp"
#include "../support/temp_dir.hpp"

namespace igrec::prep {
namespace {

// Seeded 64 x 32-d, latent 8, 150 epochs. Measured once, frozen.
constexpr double kAutoencoderInitialMse = 1.0270027220971425;
constexpr double kAutoencoderFinalMse = 0.33055879637803209;

Eigen::MatrixXd random_points(Eigen::Index dim, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(dim, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) m(i, j) = rng.normal();
  return m;
}

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("b" + std::to_string(100 + i));
  return ids;
}

TEST(Autoencoder, IdenticalVectorsReconstructAlmostExactly) {
  Eigen::MatrixXd x(6, 10);
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) << 0.5, -1.0, 2.0, 0.0, 1.5, -0.25;
  AutoencoderConfig config;
  config.hidden_dims = {8};
  config.latent_dim = 2;
  config.epochs = 400;
  config.batch_size = 10;
  const auto trained = train_autoencoder(x, config);
  const double norm2 = x.col(0).squaredNorm();
  EXPECT_LT(trained.epoch_mse.back(), 1e-3 * norm2);
}

TEST(Autoencoder, LinearFullWidthApproachesZero) {
  const Eigen::MatrixXd x = random_points(4, 40, 3);
  AutoencoderConfig config;
  config.hidden_dims = {};
  config.latent_dim = 4;
  config.latent_activation = nn::Activation::kIdentity;
  config.epochs = 600;
  config.batch_size = 40;
  config.optimizer.learning_rate = 1e-2;
  const auto trained = train_autoencoder(x, config);
  EXPECT_LT(trained.epoch_mse.back(), 1e-3 * trained.epoch_mse.front());
}

TEST(Autoencoder, SeededRunFixture) {
  const Eigen::MatrixXd x = random_points(32, 64, 17);
  AutoencoderConfig config;
  config.hidden_dims = {16};
  config.latent_dim = 8;
  config.epochs = 150;
  config.seed = 5;
  const auto trained = train_autoencoder(x, config);
  ASSERT_EQ(trained.epoch_mse.size(), 151u);
  EXPECT_LT(trained.epoch_mse.back(), trained.epoch_mse.front());
  EXPECT_NEAR(trained.epoch_mse.front(), kAutoencoderInitialMse, 1e-7);
  EXPECT_NEAR(trained.epoch_mse.back(), kAutoencoderFinalMse, 1e-7);
  const Eigen::MatrixXd held_out = random_points(32, 16, 18);
  EXPECT_TRUE(std::isfinite(trained.model.reconstruction_mse(held_out)));
}

TEST(Autoencoder, GradientMatchesFiniteDifferences) {
  AutoencoderConfig config;
  config.hidden_dims = {8};
  config.latent_dim = 3;
  config.hidden_activation = nn::Activation::kTanh;
  config.seed = 2;
  Autoencoder model = Autoencoder::create(8, config);
  const Eigen::MatrixXd x = random_points(8, 5, 9);
  AutoencoderGradients grads;
  autoencoder_loss(model, x, &grads);
  nn::ParamBlocks blocks;
  model.encoder().append_blocks("encoder", grads.encoder, blocks);
  model.decoder().append_blocks("decoder", grads.decoder, blocks);
  const auto result = nn::check_gradients(blocks, [&] { return autoencoder_loss(model, x, nullptr); });
  EXPECT_LT(result.max_relative_error, 1e-4) << result.worst_parameter;
}

TEST(Autoencoder, RejectsSingleRowAndRoundTrips) {
  AutoencoderConfig config;
  EXPECT_THROW(train_autoencoder(Eigen::MatrixXd::Ones(4, 1), config), ContractError);
  const Autoencoder model = Autoencoder::create(5, config);
  testing::TempDir dir("ae_roundtrip");
  model.save(dir.path());
  const Autoencoder loaded = Autoencoder::load(dir.path());
  const Autoencoder reloaded = [&] {
    loaded.save(dir.path());
    return Autoencoder::load(dir.path());
  }();
  const Eigen::MatrixXd x = random_points(5, 3, 1);
  EXPECT_EQ(loaded.reconstruct(x), reloaded.reconstruct(x));
}

TEST(KMeans, KEqualsNGivesZeroSse) {
  const Eigen::MatrixXd x = random_points(3, 7, 4);
  const auto result = kmeans(x, {7, 1, 50});
  EXPECT_TRUE(result.converged);
  EXPECT_DOUBLE_EQ(result.sse_trace.back(), 0.0);
  EXPECT_EQ(std::set<std::size_t>(result.assignment.begin(), result.assignment.end()).size(), 7u);
}

TEST(KMeans, KGreaterThanNRejected) {
  EXPECT_THROW(kmeans(random_points(2, 3, 1), {4, 0, 10}), ContractError);
  EXPECT_THROW(kmeans(random_points(2, 3, 1), {0, 0, 10}), ContractError);
}

TEST(KMeans, TwoBlobsMatchBruteForceLabeling) {
  // 10 points: 5 around (0,0), 5 around (10,10).
  Rng rng(12);
  Eigen::MatrixXd x(2, 10);
  for (Eigen::Index j = 0; j < 10; ++j) {
    const double base = j < 5 ? 0.0 : 10.0;
    x.col(j) << base + rng.uniform(-1, 1), base + rng.uniform(-1, 1);
  }
  // Brute force: best 2-partition by SSE over all 2^10 labelings.
  double best_sse = std::numeric_limits<double>::infinity();
  unsigned best_mask = 0;
  for (unsigned mask = 1; mask < (1u << 10) - 1; ++mask) {
    Eigen::Vector2d sum[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    int count[2] = {0, 0};
    for (int j = 0; j < 10; ++j) {
      sum[(mask >> j) & 1u] += x.col(j);
      ++count[(mask >> j) & 1u];
    }
    double sse = 0;
    for (int j = 0; j < 10; ++j) {
      const int c = (mask >> j) & 1u;
      sse += (x.col(j) - sum[c] / count[c]).squaredNorm();
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_mask = mask;
    }
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto result = kmeans(x, {2, seed, 100});
    for (int j = 0; j < 10; ++j) {
      const bool same_as_first = result.assignment[static_cast<std::size_t>(j)] == result.assignment[0];
      const bool brute_same = ((best_mask >> j) & 1u) == (best_mask & 1u);
      EXPECT_EQ(same_as_first, brute_same) << "seed " << seed << " point " << j;
    }
    EXPECT_NEAR(result.sse_trace.back(), best_sse, 1e-9);
  }
}

TEST(KMeans, SseTraceIsNonIncreasing) {
  const Eigen::MatrixXd x = random_points(4, 200, 21);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto result = kmeans(x, {12, seed, 100});
    ASSERT_FALSE(result.sse_trace.empty());
    for (std::size_t i = 1; i < result.sse_trace.size(); ++i) {
      EXPECT_LE(result.sse_trace[i], result.sse_trace[i - 1] + 1e-12) << "iteration " << i;
    }
    EXPECT_NEAR(result.sse_trace.back(), within_cluster_sse(x, result.centroids, result.assignment), 1e-9);
  }
}

TEST(KMeans, AssignmentsAreNearestCentroidAndDeterministic) {
  const Eigen::MatrixXd x = random_points(3, 120, 8);
  const auto a = kmeans(x, {10, 3, 200});
  const auto b = kmeans(x, {10, 3, 200});
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.centroids, b.centroids);
  ASSERT_TRUE(a.converged);
  for (Eigen::Index p = 0; p < x.cols(); ++p) {
    const double own = (x.col(p) - a.centroids.col(static_cast<Eigen::Index>(a.assignment[static_cast<std::size_t>(p)]))).squaredNorm();
    for (Eigen::Index c = 0; c < a.centroids.cols(); ++c) {
      EXPECT_LE(own, (x.col(p) - a.centroids.col(c)).squaredNorm() + 1e-12);
    }
  }
}

TEST(KMeans, DuplicatePointsNeverLeaveEmptyClusters) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 12);
  x.col(11) << 5.0, 5.0;
  x.col(10) << 5.0, 5.1;
  const auto result = kmeans(x, {4, 9, 50});
  std::vector<std::size_t> counts(4, 0);
  for (auto c : result.assignment) ++counts[c];
  for (auto c : counts) EXPECT_GT(c, 0u);
}

TEST(SelectMedoids, SingletonCluster) {
  Eigen::MatrixXd latents(2, 1);
  latents << 3.0, 4.0;
  const auto set = select_medoids(latents, {0}, latents, {"b7"});
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.id(0), "b7");
}

TEST(SelectMedoids, ThreePointClusterPicksNearestToMean) {
  // Points (0,0), (4,0), (1,3); mean (5/3, 1). Squared distances: 34/9, 58/9, 40/9.
  Eigen::MatrixXd latents(2, 3);
  latents << 0.0, 4.0, 1.0, 0.0, 0.0, 3.0;
  Eigen::MatrixXd centroid(2, 1);
  centroid << 5.0 / 3.0, 1.0;
  const auto set = select_medoids(centroid, {0, 0, 0}, latents, {"bx", "by", "bz"});
  EXPECT_EQ(set.id(0), "bx");
}

TEST(SelectMedoids, TieGoesToSmallerId) {
  Eigen::MatrixXd latents(1, 2);
  latents << -1.0, 1.0;
  const Eigen::MatrixXd centroid = Eigen::MatrixXd::Zero(1, 1);
  EXPECT_EQ(select_medoids(centroid, {0, 0}, latents, {"b2", "b10"}).id(0), "b10");
  EXPECT_EQ(select_medoids(centroid, {0, 0}, latents, {"b10", "b2"}).id(0), "b10");
}

TEST(ClusterBottoms, MedoidPropertyHoldsExhaustively) {
  const Eigen::MatrixXd x = random_points(5, 150, 31);
  const auto ids = make_ids(150);
  const Clustering clustering = cluster_bottoms(x, ids, {20, 4, 100});
  std::set<std::size_t> nonempty;
  for (const auto& [id, c] : clustering.assignment) nonempty.insert(c);
  EXPECT_EQ(clustering.candidates.size(), nonempty.size());
  const auto medoid_ids = clustering.candidates.ids();
  const std::set<std::string> unique(medoid_ids.begin(), medoid_ids.end());
  EXPECT_EQ(unique.size(), clustering.candidates.size());
  for (const auto& cand : clustering.candidates.items) {
    const auto centroid = clustering.centroids.col(static_cast<Eigen::Index>(cand.cluster));
    const auto medoid_col = std::find(ids.begin(), ids.end(), cand.garment_id) - ids.begin();
    const double medoid_d = (x.col(medoid_col) - centroid).squaredNorm();
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (clustering.assignment.at(ids[p]) != cand.cluster) continue;
      const double d = (x.col(static_cast<Eigen::Index>(p)) - centroid).squaredNorm();
      EXPECT_TRUE(medoid_d < d || (medoid_d == d && cand.garment_id <= ids[p])) << ids[p];
    }
    EXPECT_EQ(clustering.candidates.action_for_cluster(cand.cluster),
              static_cast<std::size_t>(&cand - clustering.candidates.items.data()));
  }
}

TEST(ClusteringIo, RoundTripAndTamperDetection) {
  const Eigen::MatrixXd x = random_points(3, 30, 2);
  const Clustering clustering = cluster_bottoms(x, make_ids(30), {6, 1, 50});
  testing::TempDir dir("clustering_io");
  save_clustering(clustering, dir.path());
  const Clustering loaded = load_clustering(dir.path());
  EXPECT_EQ(loaded.k, clustering.k);
  EXPECT_EQ(loaded.assignment, clustering.assignment);
  EXPECT_EQ(loaded.candidates.hash(), clustering.candidates.hash());
  EXPECT_TRUE(loaded.centroids.isApprox(clustering.centroids, 1e-6));
  std::filesystem::remove(dir.path() / kCentroidsFile);
  EXPECT_THROW(load_clustering(dir.path()), LoadError);
}

}  // namespace
}  // namespace igrec::prep
