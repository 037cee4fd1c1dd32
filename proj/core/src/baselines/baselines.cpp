#include "igrec/baselines/baselines.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"
#include "igrec/nn/checkpoint.hpp"

namespace igrec::baselines {
namespace {

class RandomEpisode : public agent::PolicyEpisode {
 public:
  RandomEpisode(std::size_t actions, std::uint64_t seed) : mask_(actions, false), rng_(seed) {}
  std::size_t next_action() override { return agent::random_unmasked(mask_, rng_); }
  void observe(std::size_t action, double) override { mask_.at(action) = true; }

 private:
  std::vector<bool> mask_;
  Rng rng_;
};

class LstmEpisode : public agent::PolicyEpisode {
 public:
  LstmEpisode(std::shared_ptr<const LstmRecommender> model, const Eigen::VectorXd& top)
      : model_(std::move(model)), state_(model_->start(top)), mask_(model_->action_count(), false) {}

  std::size_t next_action() override { return agent::masked_argmax(model_->logits(state_), mask_); }

  void observe(std::size_t action, double feedback) override {
    if (mask_.at(action)) throw ContractError("action " + std::to_string(action) + " was already proposed");
    mask_[action] = true;
    state_ = model_->advance(state_, feedback);
  }

 private:
  std::shared_ptr<const LstmRecommender> model_;
  nn::LstmCell::State state_;
  std::vector<bool> mask_;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

nn::Mlp single_layer(const nn::DenseLayer& layer) { return nn::Mlp({layer}); }

}  // namespace

std::unique_ptr<agent::PolicyEpisode> RandomPolicy::begin(const Eigen::VectorXd&, std::uint64_t seed) const {
  return std::make_unique<RandomEpisode>(action_count_, seed);
}

agent::DqnTraining train_no_exploration(agent::DqnConfig config, const data::Dataset& dataset,
                                        const agent::ActionSpace& space, const proxy::ProxyScorer& scorer) {
  config.schedule = agent::EpsilonSchedule::constant(0.0);
  return agent::train_dqn(config, dataset, space, scorer);
}

LstmRecommender LstmRecommender::create(std::size_t feature_dim, std::size_t actions, Rng& rng) {
  LstmRecommender m;
  m.cell = nn::LstmCell::init(feature_dim, feature_dim, rng);
  m.lift = nn::DenseLayer::init(1, feature_dim, nn::Activation::kIdentity, rng);
  m.head = nn::DenseLayer::init(feature_dim, actions, nn::Activation::kIdentity, rng);
  return m;
}

nn::LstmCell::State LstmRecommender::start(const Eigen::VectorXd& top_feature) const {
  if (static_cast<std::size_t>(top_feature.size()) != feature_dim()) throw ShapeError("top feature dim differs from hidden dim");
  return cell.initial_state(top_feature);
}

nn::LstmCell::State LstmRecommender::advance(const nn::LstmCell::State& state, double feedback) const {
  return cell.step(state, lift.weights.col(0) * feedback + lift.bias);
}

Eigen::VectorXd LstmRecommender::logits(const nn::LstmCell::State& state) const {
  return head.weights * state.hidden + head.bias;
}

nn::ParamBlocks lstm_blocks(LstmRecommender& model, const LstmGradients& grads) {
  nn::ParamBlocks blocks;
  model.cell.append_blocks("lstm", grads.cell, blocks);
  blocks.push_back(nn::make_block("lift.weights", model.lift.weights, grads.lift_weights));
  blocks.push_back(nn::make_block("lift.bias", model.lift.bias, grads.lift_bias));
  blocks.push_back(nn::make_block("head.weights", model.head.weights, grads.head_weights));
  blocks.push_back(nn::make_block("head.bias", model.head.bias, grads.head_bias));
  return blocks;
}

double lstm_sequence_loss(const LstmRecommender& model, const Eigen::VectorXd& top_feature,
                          const std::vector<double>& feedbacks, std::size_t target, LstmGradients* grads) {
  if (target >= model.action_count()) throw ContractError("target action out of range");
  const std::size_t steps = feedbacks.size() + 1;
  std::vector<nn::LstmCell::State> states{model.start(top_feature)};
  std::vector<nn::LstmCell::StepCache> caches(feedbacks.size());
  for (std::size_t t = 0; t < feedbacks.size(); ++t) {
    const Eigen::VectorXd x = model.lift.weights.col(0) * feedbacks[t] + model.lift.bias;
    states.push_back(model.cell.step(states.back(), x, caches[t]));
  }
  double loss = 0.0;
  std::vector<Eigen::VectorXd> d_logits(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::VectorXd z = model.logits(states[t]);
    const double shift = z.maxCoeff();
    const double log_sum = shift + std::log((z.array() - shift).exp().sum());
    loss += log_sum - z(static_cast<Eigen::Index>(target));
    if (grads) {
      d_logits[t] = softmax(z);
      d_logits[t](static_cast<Eigen::Index>(target)) -= 1.0;
      d_logits[t] /= static_cast<double>(steps);
    }
  }
  loss /= static_cast<double>(steps);
  if (!grads) return loss;

  grads->cell.set_zero_like(model.cell);
  grads->lift_weights = Eigen::MatrixXd::Zero(model.lift.weights.rows(), 1);
  grads->lift_bias = Eigen::VectorXd::Zero(model.lift.bias.size());
  grads->head_weights = Eigen::MatrixXd::Zero(model.head.weights.rows(), model.head.weights.cols());
  grads->head_bias = Eigen::VectorXd::Zero(model.head.bias.size());
  const Eigen::Index hdim = static_cast<Eigen::Index>(model.feature_dim());
  Eigen::VectorXd d_hidden = Eigen::VectorXd::Zero(hdim);
  Eigen::VectorXd d_cell = Eigen::VectorXd::Zero(hdim);
  for (std::size_t t = steps; t-- > 0;) {
    grads->head_weights += d_logits[t] * states[t].hidden.transpose();
    grads->head_bias += d_logits[t];
    d_hidden += model.head.weights.transpose() * d_logits[t];
    if (t == 0) break;
    Eigen::VectorXd d_hidden_prev, d_cell_prev, d_input;
    model.cell.backward_step(caches[t - 1], d_hidden, d_cell, grads->cell, d_hidden_prev, d_cell_prev, d_input);
    grads->lift_weights.col(0) += d_input * feedbacks[t - 1];
    grads->lift_bias += d_input;
    d_hidden = d_hidden_prev;
    d_cell = d_cell_prev;
  }
  return loss;
}

LstmTraining train_lstm(const LstmConfig& config, const data::Dataset& dataset, const prep::Clustering& clustering,
                        const agent::ActionSpace& space, const proxy::ProxyScorer& scorer) {
  if (config.steps == 0 || config.steps > space.size()) throw ContractError("episode length must lie in [1, |A|]");
  auto train = dataset.quadruples_in(data::Split::kTrain);
  if (train.empty()) throw ContractError("train_lstm needs training quadruples");
  Rng rng(config.seed);
  LstmTraining result{LstmRecommender::create(space.feature_dim(), space.size(), rng), {}};
  LstmRecommender& model = result.model;
  nn::Optimizer sgd({nn::OptimizerKind::kSgd, config.learning_rate});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(train));
    double total = 0.0;
    for (const auto& q : train) {
      const auto cluster = clustering.assignment.find(q.positive);
      if (cluster == clustering.assignment.end()) throw ContractError("bottom '" + q.positive + "' is not clustered");
      const std::size_t target = space.candidates.action_for_cluster(cluster->second);
      if (target == space.size()) throw ContractError("cluster of '" + q.positive + "' has no candidate");
      const Eigen::VectorXd& top = dataset.garment(q.top).feature;

      // Roll out the current model greedily to collect the proxy feedback inputs.
      std::vector<double> feedbacks;
      std::vector<bool> mask(space.size(), false);
      auto state = model.start(top);
      for (std::size_t t = 0; t + 1 < config.steps; ++t) {
        const std::size_t action = agent::masked_argmax(model.logits(state), mask);
        mask[action] = true;
        const double fb = scorer.feedback(q.user, q.top, space.bottom_id(action));
        feedbacks.push_back(fb);
        state = model.advance(state, fb);
      }
      LstmGradients grads;
      const double loss = lstm_sequence_loss(model, top, feedbacks, target, &grads);
      if (!std::isfinite(loss)) throw TrainingError("LSTM loss became non-finite at epoch " + std::to_string(epoch));
      sgd.step(lstm_blocks(model, grads));
      total += loss;
    }
    result.epoch_loss.push_back(total / static_cast<double>(train.size()));
  }
  return result;
}

LstmPolicy::LstmPolicy(std::shared_ptr<const LstmRecommender> model) : model_(std::move(model)) {
  if (!model_) throw ContractError("LstmPolicy needs a model");
}

std::unique_ptr<agent::PolicyEpisode> LstmPolicy::begin(const Eigen::VectorXd& top_feature, std::uint64_t) const {
  return std::make_unique<LstmEpisode>(model_, top_feature);
}

void save_lstm_recommender(const LstmRecommender& model, const std::string& candidate_hash,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_lstm(model.cell, dir / "lstm.ckpt");
  nn::save_mlp(single_layer(model.lift), dir / "lift.ckpt");
  nn::save_mlp(single_layer(model.head), dir / "head.ckpt");
  const nlohmann::json doc = {{"format", "igrec-agent"},
                              {"version", 1},
                              {"kind", "lstm"},
                              {"candidate_hash", candidate_hash},
                              {"feature_dim", model.feature_dim()},
                              {"actions", model.action_count()}};
  io::write_text_file(dir / agent::kAgentFile, doc.dump(2));
}

LstmRecommender load_lstm_recommender(const std::filesystem::path& dir, const std::string& expected_hash) {
  const auto path = dir / agent::kAgentFile;
  try {
    const auto doc = nlohmann::json::parse(io::read_text_file(path));
    if (doc.at("kind") != "lstm") throw LoadError("agent kind is not lstm");
    LstmRecommender m;
    m.cell = nn::load_lstm(dir / "lstm.ckpt");
    m.lift = nn::load_mlp(dir / "lift.ckpt").layers().at(0);
    m.head = nn::load_mlp(dir / "head.ckpt").layers().at(0);
    if (m.lift.in_dim() != 1 || m.lift.out_dim() != m.feature_dim() || m.head.in_dim() != m.feature_dim() ||
        m.head.out_dim() != doc.at("actions").get<std::size_t>() || m.cell.input_dim() != m.feature_dim()) {
      throw LoadError("LSTM recommender parts have inconsistent dims");
    }
    const auto hash = doc.at("candidate_hash").get<std::string>();
    if (!expected_hash.empty() && hash != expected_hash) {
      throw LoadError("candidate_hash " + hash + " does not match the clustering (" + expected_hash + ")");
    }
    return m;
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace igrec::baselines
