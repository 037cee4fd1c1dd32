#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "igrec/data/dataset.hpp"

namespace igrec::data {

/// Knobs of the synthetic stand-in for a real outfit corpus.
struct SyntheticConfig {
  std::size_t feature_dim = 32;
  std::size_t style_dim = 6;
  std::optional<std::size_t> context_dim;  // unset: visual-only dataset
  double noise = 0.0;           // stddev of the noise added to affinities when picking pos/neg
  double taste_weight = 1.0;    // weight of user taste . bottom style
  double match_weight = 0.5;    // weight of top style . bottom style
  double feature_noise = 0.05;  // observation noise on garment features
  std::size_t candidate_pool = 8;  // bottoms drawn per quadruple; positive is the best of the pool
  std::uint64_t seed = 0;
};

/// Hidden generative model behind a synthetic dataset. Serves as ground-truth oracle.
class SyntheticWorld {
 public:
  SyntheticWorld() = default;
  SyntheticWorld(SyntheticConfig config, std::map<std::string, Eigen::VectorXd> tastes,
                 std::map<std::string, Eigen::VectorXd> styles);

  const SyntheticConfig& config() const { return config_; }

  /// taste_weight * taste(user) . style(bottom) + match_weight * style(top) . style(bottom)
  double truth(const std::string& user, const std::string& top, const std::string& bottom) const;
  double taste_affinity(const std::string& user, const std::string& bottom) const;
  double match(const std::string& top, const std::string& bottom) const;

  const Eigen::VectorXd& taste(const std::string& user) const;
  const Eigen::VectorXd& style(const std::string& garment) const;

 private:
  SyntheticConfig config_;
  std::map<std::string, Eigen::VectorXd> tastes_;
  std::map<std::string, Eigen::VectorXd> styles_;
};

struct SyntheticData {
  Dataset dataset;  // all quadruples tagged train; see split()
  SyntheticWorld world;
};

/// Deterministic in (config, counts). Features are rounded to f32 so that a
/// manifest round trip is lossless. (user, top) pairs are distinct whenever
/// n_quadruples <= n_users * n_tops.
/// Throws ContractError when a count is zero or n_bottoms < 2.
SyntheticData generate_synthetic(const SyntheticConfig& config, std::size_t n_users, std::size_t n_tops,
                                 std::size_t n_bottoms, std::size_t n_quadruples);

/// Reassigns quadruple splits so that every (user, top) key lands in exactly one
/// split. Keys are shuffled under `seed` and packed greedily until each split
/// reaches round(cumulative ratio * n) quadruples.
/// Throws ContractError when ratios are negative or do not sum to 1, or when a
/// split with positive ratio ends up empty.
Dataset split(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace igrec::data
