#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igrec/agent/dqn.hpp"
#include "igrec/agent/episode.hpp"
#include "igrec/nn/lstm.hpp"
#include "igrec/nn/mlp.hpp"
#include "igrec/preprocess/candidates.hpp"
#include "igrec/proxy/scorer.hpp"

namespace igrec::baselines {

/// Uniform over the actions not yet proposed.
class RandomPolicy : public agent::Policy {
 public:
  explicit RandomPolicy(std::size_t action_count) : action_count_(action_count) {}
  std::string kind() const override { return "random"; }
  std::size_t action_count() const override { return action_count_; }
  std::unique_ptr<agent::PolicyEpisode> begin(const Eigen::VectorXd& top_feature, std::uint64_t seed) const override;

 private:
  std::size_t action_count_;
};

/// The DQN trainer with epsilon pinned to 0 for every epoch.
agent::DqnTraining train_no_exploration(agent::DqnConfig config, const data::Dataset& dataset,
                                        const agent::ActionSpace& space, const proxy::ProxyScorer& scorer);

/// Recurrent recommender: hidden starts at the top feature, each feedback score
/// is lifted 1 -> D and fed as the next input, a linear head scores actions.
struct LstmRecommender {
  nn::LstmCell cell;    // input D, hidden D
  nn::DenseLayer lift;  // 1 -> D, identity
  nn::DenseLayer head;  // D -> |A|, identity

  static LstmRecommender create(std::size_t feature_dim, std::size_t actions, Rng& rng);

  std::size_t feature_dim() const { return cell.hidden_dim(); }
  std::size_t action_count() const { return head.out_dim(); }

  nn::LstmCell::State start(const Eigen::VectorXd& top_feature) const;
  nn::LstmCell::State advance(const nn::LstmCell::State& state, double feedback) const;
  Eigen::VectorXd logits(const nn::LstmCell::State& state) const;
};

struct LstmGradients {
  nn::LstmCell::Gradients cell;
  Eigen::MatrixXd lift_weights, head_weights;
  Eigen::VectorXd lift_bias, head_bias;
};

nn::ParamBlocks lstm_blocks(LstmRecommender& model, const LstmGradients& grads);

/// Teacher-forced sequence loss: logits at steps 0..N-1 (N = feedbacks.size() + 1),
/// the state advanced by feedbacks[t] between steps; mean cross-entropy to `target`.
double lstm_sequence_loss(const LstmRecommender& model, const Eigen::VectorXd& top_feature,
                          const std::vector<double>& feedbacks, std::size_t target, LstmGradients* grads);

struct LstmConfig {
  std::size_t epochs = 10;
  std::size_t steps = agent::kDefaultEpisodeLength;
  double learning_rate = 0.05;  // plain SGD, one update per training quadruple
  std::uint64_t seed = 0;
};

struct LstmTraining {
  LstmRecommender model;
  std::vector<double> epoch_loss;
};

/// Supervised training: the label of a quadruple is the action of its positive
/// bottom's cluster. Feedback inputs come from the proxy scoring the model's own
/// greedy proposals. Throws TrainingError on a non-finite loss.
LstmTraining train_lstm(const LstmConfig& config, const data::Dataset& dataset, const prep::Clustering& clustering,
                        const agent::ActionSpace& space, const proxy::ProxyScorer& scorer);

class LstmPolicy : public agent::Policy {
 public:
  explicit LstmPolicy(std::shared_ptr<const LstmRecommender> model);
  std::string kind() const override { return "lstm"; }
  std::size_t action_count() const override { return model_->action_count(); }
  std::unique_ptr<agent::PolicyEpisode> begin(const Eigen::VectorXd& top_feature, std::uint64_t seed) const override;

 private:
  std::shared_ptr<const LstmRecommender> model_;
};

/// lstm.ckpt, lift.ckpt, head.ckpt and agent.json with kind "lstm".
void save_lstm_recommender(const LstmRecommender& model, const std::string& candidate_hash,
                           const std::filesystem::path& dir);
LstmRecommender load_lstm_recommender(const std::filesystem::path& dir, const std::string& expected_hash = {});

}  // namespace igrec::baselines
