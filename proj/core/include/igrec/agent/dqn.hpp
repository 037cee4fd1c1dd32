#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igrec/agent/episode.hpp"
#include "igrec/agent/state.hpp"
#include "igrec/nn/mlp.hpp"
#include "igrec/nn/optimizer.hpp"
#include "igrec/proxy/scorer.hpp"

namespace igrec::agent {

struct Transition {
  Eigen::VectorXd state;
  std::size_t action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool terminal = false;
  std::vector<bool> next_mask;  // actions unavailable from next_state
};

/// Fixed-capacity ring buffer sampled uniformly with replacement.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  /// Throws StateError while size() < batch.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

/// y = r for terminal transitions, else r + gamma * max over unmasked a' of Q_target(s', a').
double td_target(const nn::Mlp& target, const Transition& t, double gamma);

/// Mean over the batch of 0.5 * (Q(s, a) - y)^2, y held fixed. Fills `grads` when non-null.
double td_loss(const nn::Mlp& q, const nn::Mlp& target, const std::vector<const Transition*>& batch, double gamma,
               nn::MlpGradients* grads);

struct DqnConfig {
  std::vector<std::size_t> hidden_dims{64, 64};  // 2048, 2048 at full scale
  double gamma = 0.9;
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 64;
  std::size_t target_sync = 100;  // updates between target-network copies
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 1e-3};
  EpsilonSchedule schedule;
  std::size_t epochs = 300;
  std::size_t episodes_per_epoch = 8;  // epsilon is held fixed within an epoch
  std::size_t steps = kDefaultEpisodeLength;
  double divergence_threshold = 1e4;
  std::size_t divergence_window = 50;  // consecutive updates above the threshold before aborting
  std::uint64_t seed = 0;
};

struct DqnTraining {
  nn::Mlp q;
  std::vector<double> epoch_mean_score;  // mean normalized feedback over the epoch's steps
  std::vector<double> epoch_loss;        // mean TD loss over the epoch's updates (0 before warm-up)
  std::vector<double> epsilon;
  std::size_t updates = 0;
};

/// Builds a Q-network D -> hidden... -> |A| (ReLU hidden, identity output).
nn::Mlp make_q_network(std::size_t feature_dim, const std::vector<std::size_t>& hidden, std::size_t actions, Rng& rng);

/// Deep Q-learning against the proxy. Episodes start from (user, top) pairs
/// drawn uniformly from the train split. Throws TrainingError on divergence.
DqnTraining train_dqn(const DqnConfig& config, const data::Dataset& dataset, const ActionSpace& space,
                      const proxy::ProxyScorer& scorer);

/// Acts through a frozen Q-network.
class DqnPolicy : public Policy {
 public:
  DqnPolicy(std::shared_ptr<const nn::Mlp> q, std::shared_ptr<const ActionSpace> space, std::string kind = "rl",
            double epsilon = 0.0);

  std::string kind() const override { return kind_; }
  std::size_t action_count() const override { return space_->size(); }
  std::unique_ptr<PolicyEpisode> begin(const Eigen::VectorXd& top_feature, std::uint64_t seed) const override;

 private:
  std::shared_ptr<const nn::Mlp> q_;
  std::shared_ptr<const ActionSpace> space_;
  std::string kind_;
  double epsilon_;
};

struct AgentCheckpoint {
  std::string kind = "rl";
  nn::Mlp q;
  std::string candidate_hash;
  std::size_t feature_dim = 0;
  double gamma = 0.9;
  EpsilonSchedule schedule;
};

inline constexpr const char* kAgentFile = "agent.json";

void save_agent(const AgentCheckpoint& checkpoint, const std::filesystem::path& dir);
/// Throws LoadError when files are missing, or when `expected_hash` is given and differs.
AgentCheckpoint load_agent(const std::filesystem::path& dir, const std::string& expected_hash = {});

}  // namespace igrec::agent
