#include "igrec/agent/state.hpp"

#include <cmath>

#include "igrec/common/error.hpp"

namespace igrec::agent {

ActionSpace ActionSpace::build(const data::Dataset& dataset, prep::CandidateSet candidates) {
  if (candidates.size() == 0) throw ContractError("action space needs at least one candidate");
  ActionSpace space{std::move(candidates), {}};
  space.features = dataset.feature_matrix(space.candidates.ids());
  for (const auto& c : space.candidates.items) {
    if (dataset.garment(c.garment_id).category != data::Category::kBottom) {
      throw ContractError("candidate '" + c.garment_id + "' is not a bottom");
    }
  }
  return space;
}

AgentState init_episode(const Eigen::VectorXd& top_feature, std::size_t feature_dim, std::size_t action_count) {
  if (static_cast<std::size_t>(top_feature.size()) != feature_dim) {
    throw ShapeError("top feature has " + std::to_string(top_feature.size()) + " entries, expected " +
                     std::to_string(feature_dim));
  }
  AgentState state;
  state.s = top_feature;
  state.mask.assign(action_count, false);
  return state;
}

void update_state(AgentState& state, std::size_t action, double feedback, const Eigen::VectorXd& bottom_feature) {
  if (action >= state.mask.size()) throw ContractError("action " + std::to_string(action) + " is out of range");
  if (state.mask[action]) throw ContractError("action " + std::to_string(action) + " was already proposed");
  if (!(feedback >= 0.0 && feedback <= 1.0)) throw ContractError("feedback must lie in [0, 1]");
  if (bottom_feature.size() != state.s.size()) throw ShapeError("bottom feature dim differs from the state dim");
  state.s += feedback * bottom_feature;
  state.mask[action] = true;
  state.proposed.push_back(action);
}

double reward(std::optional<double> previous, double current) {
  return current - previous.value_or(kRewardBaseline);
}

void EpsilonSchedule::validate() const {
  if (!(0.0 <= end && end <= start && start <= 1.0)) throw ContractError("epsilon schedule needs 0 <= end <= start <= 1");
  if (!(decay > 0.0)) throw ContractError("epsilon decay must be positive");
}

double EpsilonSchedule::at(double epoch) const { return end + (start - end) * std::exp(-epoch / decay); }

std::size_t masked_argmax(const Eigen::VectorXd& values, const std::vector<bool>& mask) {
  if (static_cast<std::size_t>(values.size()) != mask.size()) throw ShapeError("value and mask lengths differ");
  std::size_t best = mask.size();
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) continue;
    if (best == mask.size() || values(static_cast<Eigen::Index>(a)) > values(static_cast<Eigen::Index>(best))) best = a;
  }
  if (best == mask.size()) throw StateError("action space exhausted: every candidate was already proposed");
  return best;
}

std::size_t random_unmasked(const std::vector<bool>& mask, Rng& rng) {
  std::vector<std::size_t> open;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (!mask[a]) open.push_back(a);
  }
  if (open.empty()) throw StateError("action space exhausted: every candidate was already proposed");
  return open[rng.index(open.size())];
}

std::size_t select_action(const nn::Mlp& q, const AgentState& state, double eps, Rng& rng) {
  if (state.remaining() == 0) throw StateError("action space exhausted: every candidate was already proposed");
  if (q.out_dim() != state.mask.size()) throw ShapeError("Q-network output dim differs from the action count");
  if (eps > 0.0 && rng.uniform() < eps) return random_unmasked(state.mask, rng);
  return masked_argmax(q.forward(state.s), state.mask);
}

}  // namespace igrec::agent
