#include "igrec/agent/dqn.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"
#include "igrec/nn/checkpoint.hpp"

namespace igrec::agent {

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractError("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayMemory::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t batch, Rng& rng) const {
  if (batch == 0 || items_.size() < batch) {
    throw StateError("replay memory holds " + std::to_string(items_.size()) + " transitions, batch needs " +
                     std::to_string(batch));
  }
  std::vector<const Transition*> out(batch);
  for (auto& p : out) p = &items_[rng.index(items_.size())];
  return out;
}

namespace {

double bootstrap(const Transition& t, const Eigen::Ref<const Eigen::VectorXd>& next_q, double gamma) {
  bool any = false;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < t.next_mask.size(); ++a) {
    if (t.next_mask[a]) continue;
    any = true;
    best = std::max(best, next_q(static_cast<Eigen::Index>(a)));
  }
  return any ? t.reward + gamma * best : t.reward;
}

}  // namespace

double td_target(const nn::Mlp& target, const Transition& t, double gamma) {
  if (t.terminal || gamma == 0.0) return t.reward;
  return bootstrap(t, target.forward(t.next_state), gamma);
}

double td_loss(const nn::Mlp& q, const nn::Mlp& target, const std::vector<const Transition*>& batch, double gamma,
               nn::MlpGradients* grads) {
  if (batch.empty()) throw ContractError("td_loss needs a nonempty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd states(static_cast<Eigen::Index>(q.in_dim()), n);
  for (Eigen::Index b = 0; b < n; ++b) states.col(b) = batch[static_cast<std::size_t>(b)]->state;
  nn::ForwardCache cache;
  const Eigen::MatrixXd values = grads ? q.forward_batch(states, cache) : q.forward_batch(states);
  // Targets for the whole batch from one pass of the target network.
  std::vector<double> targets(batch.size());
  std::vector<Eigen::Index> open;
  for (Eigen::Index b = 0; b < n; ++b) {
    const Transition& t = *batch[static_cast<std::size_t>(b)];
    targets[static_cast<std::size_t>(b)] = t.reward;
    if (!t.terminal && gamma != 0.0) open.push_back(b);
  }
  if (!open.empty()) {
    Eigen::MatrixXd next(static_cast<Eigen::Index>(target.in_dim()), static_cast<Eigen::Index>(open.size()));
    for (std::size_t i = 0; i < open.size(); ++i) {
      next.col(static_cast<Eigen::Index>(i)) = batch[static_cast<std::size_t>(open[i])]->next_state;
    }
    const Eigen::MatrixXd next_q = target.forward_batch(next);
    for (std::size_t i = 0; i < open.size(); ++i) {
      const auto b = static_cast<std::size_t>(open[i]);
      targets[b] = bootstrap(*batch[b], next_q.col(static_cast<Eigen::Index>(i)), gamma);
    }
  }
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(values.rows(), values.cols());
  double loss = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const Transition& t = *batch[static_cast<std::size_t>(b)];
    const auto a = static_cast<Eigen::Index>(t.action);
    if (a >= values.rows()) throw ContractError("transition action out of range");
    const double diff = values(a, b) - targets[static_cast<std::size_t>(b)];
    loss += 0.5 * diff * diff;
    upstream(a, b) = diff / static_cast<double>(n);
  }
  if (grads) *grads = q.backward(cache, upstream);
  return loss / static_cast<double>(n);
}

nn::Mlp make_q_network(std::size_t feature_dim, const std::vector<std::size_t>& hidden, std::size_t actions, Rng& rng) {
  std::vector<std::size_t> dims{feature_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(actions);
  return nn::Mlp::create(dims, nn::Activation::kRelu, nn::Activation::kIdentity, rng);
}

DqnTraining train_dqn(const DqnConfig& config, const data::Dataset& dataset, const ActionSpace& space,
                      const proxy::ProxyScorer& scorer) {
  config.schedule.validate();
  if (config.steps == 0 || config.steps > space.size()) throw ContractError("episode length must lie in [1, |A|]");
  if (config.batch_size == 0 || config.target_sync == 0) throw ContractError("batch size and target sync must be positive");
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0)) throw ContractError("gamma must lie in [0, 1]");

  std::set<data::UserTopKey> key_set;
  for (const auto& q : dataset.quadruples_in(data::Split::kTrain)) key_set.insert({q.user, q.top});
  if (key_set.empty()) throw ContractError("train_dqn needs training (user, top) pairs");
  const std::vector<data::UserTopKey> keys(key_set.begin(), key_set.end());

  Rng rng(config.seed);
  DqnTraining result;
  result.q = make_q_network(space.feature_dim(), config.hidden_dims, space.size(), rng);
  nn::Mlp target = result.q;
  nn::Optimizer optimizer(config.optimizer);
  ReplayMemory replay(config.replay_capacity);
  std::size_t over_threshold = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double eps = config.schedule.at(static_cast<double>(epoch));
    double score_sum = 0.0, loss_sum = 0.0;
    std::size_t score_count = 0, loss_count = 0;
    for (std::size_t e = 0; e < config.episodes_per_epoch; ++e) {
      const auto& [user, top] = keys[rng.index(keys.size())];
      AgentState state = init_episode(dataset.garment(top).feature, space.feature_dim(), space.size());
      std::optional<double> previous;
      for (std::size_t t = 0; t < config.steps; ++t) {
        const std::size_t action = select_action(result.q, state, eps, rng);
        const double fb = scorer.feedback(user, top, space.bottom_id(action));
        Transition tr{state.s, action, reward(previous, fb), {}, t + 1 == config.steps, {}};
        update_state(state, action, fb, space.features.col(static_cast<Eigen::Index>(action)));
        tr.next_state = state.s;
        tr.next_mask = state.mask;
        replay.push(std::move(tr));
        previous = fb;
        score_sum += fb;
        ++score_count;

        if (replay.size() < config.batch_size) continue;
        nn::MlpGradients grads;
        const double loss = td_loss(result.q, target, replay.sample(config.batch_size, rng), config.gamma, &grads);
        if (!std::isfinite(loss)) {
          throw TrainingError("TD loss became non-finite at epoch " + std::to_string(epoch) + " after " +
                              std::to_string(result.updates) + " updates");
        }
        over_threshold = loss > config.divergence_threshold ? over_threshold + 1 : 0;
        if (over_threshold >= config.divergence_window) {
          throw TrainingError("DQN diverged: TD loss above " + std::to_string(config.divergence_threshold) + " for " +
                              std::to_string(over_threshold) + " consecutive updates (epoch " + std::to_string(epoch) +
                              ", last loss " + std::to_string(loss) + ")");
        }
        nn::ParamBlocks blocks;
        result.q.append_blocks("q", grads, blocks);
        optimizer.step(blocks);
        ++result.updates;
        if (result.updates % config.target_sync == 0) target = result.q;
        loss_sum += loss;
        ++loss_count;
      }
    }
    result.epsilon.push_back(eps);
    result.epoch_mean_score.push_back(score_count ? score_sum / static_cast<double>(score_count) : 0.0);
    result.epoch_loss.push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);
  }
  return result;
}

namespace {

class DqnEpisode : public PolicyEpisode {
 public:
  DqnEpisode(std::shared_ptr<const nn::Mlp> q, std::shared_ptr<const ActionSpace> space, double epsilon,
             const Eigen::VectorXd& top, std::uint64_t seed)
      : q_(std::move(q)), space_(std::move(space)), epsilon_(epsilon), rng_(seed),
        state_(init_episode(top, space_->feature_dim(), space_->size())) {}

  std::size_t next_action() override { return select_action(*q_, state_, epsilon_, rng_); }

  void observe(std::size_t action, double feedback) override {
    update_state(state_, action, feedback, space_->features.col(static_cast<Eigen::Index>(action)));
  }

 private:
  std::shared_ptr<const nn::Mlp> q_;
  std::shared_ptr<const ActionSpace> space_;
  double epsilon_;
  Rng rng_;
  AgentState state_;
};

}  // namespace

DqnPolicy::DqnPolicy(std::shared_ptr<const nn::Mlp> q, std::shared_ptr<const ActionSpace> space, std::string kind,
                     double epsilon)
    : q_(std::move(q)), space_(std::move(space)), kind_(std::move(kind)), epsilon_(epsilon) {
  if (!q_ || !space_) throw ContractError("DqnPolicy needs a Q-network and an action space");
  if (q_->out_dim() != space_->size() || q_->in_dim() != space_->feature_dim()) {
    throw ShapeError("Q-network dims (" + std::to_string(q_->in_dim()) + " -> " + std::to_string(q_->out_dim()) +
                     ") do not match the action space (" + std::to_string(space_->feature_dim()) + " -> " +
                     std::to_string(space_->size()) + ")");
  }
}

std::unique_ptr<PolicyEpisode> DqnPolicy::begin(const Eigen::VectorXd& top_feature, std::uint64_t seed) const {
  return std::make_unique<DqnEpisode>(q_, space_, epsilon_, top_feature, seed);
}

void save_agent(const AgentCheckpoint& checkpoint, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_mlp(checkpoint.q, dir / "q.ckpt");
  const nlohmann::json doc = {{"format", "igrec-agent"},
                              {"version", 1},
                              {"kind", checkpoint.kind},
                              {"candidate_hash", checkpoint.candidate_hash},
                              {"feature_dim", checkpoint.feature_dim},
                              {"actions", checkpoint.q.out_dim()},
                              {"gamma", checkpoint.gamma},
                              {"schedule",
                               {{"start", checkpoint.schedule.start},
                                {"end", checkpoint.schedule.end},
                                {"decay", checkpoint.schedule.decay}}}};
  io::write_text_file(dir / kAgentFile, doc.dump(2));
}

AgentCheckpoint load_agent(const std::filesystem::path& dir, const std::string& expected_hash) {
  const auto path = dir / kAgentFile;
  try {
    const auto doc = nlohmann::json::parse(io::read_text_file(path));
    if (doc.at("format") != "igrec-agent" || doc.at("version") != 1) throw LoadError("unsupported agent format");
    AgentCheckpoint out;
    out.kind = doc.at("kind").get<std::string>();
    out.candidate_hash = doc.at("candidate_hash").get<std::string>();
    out.feature_dim = doc.at("feature_dim").get<std::size_t>();
    out.gamma = doc.at("gamma").get<double>();
    const auto& s = doc.at("schedule");
    out.schedule = {s.at("start").get<double>(), s.at("end").get<double>(), s.at("decay").get<double>()};
    out.q = nn::load_mlp(dir / "q.ckpt");
    if (out.q.out_dim() != doc.at("actions").get<std::size_t>() || out.q.in_dim() != out.feature_dim) {
      throw LoadError("q.ckpt dims disagree with agent.json");
    }
    if (!expected_hash.empty() && expected_hash != out.candidate_hash) {
      throw LoadError("candidate_hash " + out.candidate_hash + " does not match the clustering (" + expected_hash + ")");
    }
    return out;
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace igrec::agent
