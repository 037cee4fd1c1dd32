#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "igrec/common/rng.hpp"
#include "igrec/data/dataset.hpp"
#include "igrec/nn/mlp.hpp"
#include "igrec/preprocess/candidates.hpp"

namespace igrec::agent {

/// Candidate bottoms with their features, column a holding action a.
struct ActionSpace {
  prep::CandidateSet candidates;
  Eigen::MatrixXd features;  // D x |A|

  static ActionSpace build(const data::Dataset& dataset, prep::CandidateSet candidates);

  std::size_t size() const { return candidates.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.rows()); }
  const std::string& bottom_id(std::size_t action) const { return candidates.id(action); }
};

/// s starts at the top feature and accumulates feedback-weighted bottom features.
struct AgentState {
  Eigen::VectorXd s;
  std::vector<std::size_t> proposed;  // in proposal order
  std::vector<bool> mask;             // mask[a] == true once a was proposed

  std::size_t step() const { return proposed.size(); }
  bool is_proposed(std::size_t action) const { return action < mask.size() && mask[action]; }
  std::size_t remaining() const { return mask.size() - proposed.size(); }
};

/// s = f_t, nothing proposed. Throws ShapeError when f_t does not have `feature_dim` entries.
AgentState init_episode(const Eigen::VectorXd& top_feature, std::size_t feature_dim, std::size_t action_count);

/// s' = s + feedback * f_b; marks `action` proposed.
/// Throws ContractError on a repeated or out-of-range action or feedback outside [0, 1].
void update_state(AgentState& state, std::size_t action, double feedback, const Eigen::VectorXd& bottom_feature);

inline constexpr double kRewardBaseline = 0.5;

/// curr - prev, or curr - 0.5 on the first step.
double reward(std::optional<double> previous, double current);

/// epsilon(i) = end + (start - end) * exp(-i / decay)
struct EpsilonSchedule {
  double start = 0.9;
  double end = 0.25;
  double decay = 200.0;

  static EpsilonSchedule constant(double eps) { return {eps, eps, 1.0}; }

  /// Throws ContractError unless 0 <= end <= start <= 1 and decay > 0.
  void validate() const;
  double at(double epoch) const;
};

/// Index of the largest unmasked value, ties to the lowest index.
/// Throws StateError when every action is masked.
std::size_t masked_argmax(const Eigen::VectorXd& values, const std::vector<bool>& mask);

/// Uniform draw over unmasked actions. Throws StateError when none remain.
std::size_t random_unmasked(const std::vector<bool>& mask, Rng& rng);

/// With probability eps a uniform unproposed action, else the masked argmax of Q(s, .).
std::size_t select_action(const nn::Mlp& q, const AgentState& state, double eps, Rng& rng);

}  // namespace igrec::agent
