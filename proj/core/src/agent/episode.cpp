#include "igrec/agent/episode.hpp"

#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "igrec/common/error.hpp"

namespace igrec::agent {

Feedback ProxyFeedbackSource::score(std::size_t, const std::string& bottom_id) {
  const double raw = scorer_.raw(user_, top_, bottom_id);
  return {raw, scorer_.normalizer().normalize(raw)};
}

std::vector<std::size_t> EpisodeLog::actions() const {
  std::vector<std::size_t> out;
  for (const auto& s : steps) out.push_back(s.action);
  return out;
}

InteractiveEpisode::InteractiveEpisode(const Policy& policy, const ActionSpace& space,
                                       const Eigen::VectorXd& top_feature, std::uint64_t seed,
                                       std::size_t max_steps, bool stop_on_satisfaction)
    : space_(space), max_steps_(max_steps), stop_on_satisfaction_(stop_on_satisfaction) {
  if (max_steps == 0 || max_steps > space.size()) {
    throw ContractError("episode length must lie in [1, " + std::to_string(space.size()) + "]");
  }
  if (policy.action_count() != space.size()) throw ShapeError("policy and action space disagree on the action count");
  episode_ = policy.begin(top_feature, seed);
}

bool InteractiveEpisode::done() const { return steps_.size() >= max_steps_ || satisfied_; }

std::size_t InteractiveEpisode::propose() {
  if (pending_) throw StateError("a recommendation is already awaiting feedback");
  if (done()) throw StateError("the episode is finished");
  const std::size_t action = episode_->next_action();
  for (const auto& s : steps_) {
    if (s.action == action) throw StateError("policy repeated action " + std::to_string(action));
  }
  pending_ = action;
  return action;
}

const EpisodeStep& InteractiveEpisode::feedback(const Feedback& fb) {
  if (!pending_) throw StateError("no recommendation is awaiting feedback");
  if (!(fb.normalized >= 0.0 && fb.normalized <= 1.0)) throw ContractError("feedback score must lie in [0, 1]");
  const std::size_t action = *pending_;
  std::optional<double> previous;
  if (!steps_.empty()) previous = steps_.back().normalized;
  episode_->observe(action, fb.normalized);
  pending_.reset();
  steps_.push_back({steps_.size() + 1, action, space_.bottom_id(action), fb.raw, fb.normalized,
                    reward(previous, fb.normalized)});
  if (stop_on_satisfaction_ && fb.normalized >= kSatisfactionThreshold) satisfied_ = true;
  return steps_.back();
}

EpisodeLog run_episode(const Policy& policy, const ActionSpace& space, FeedbackSource& source, const std::string& user,
                       const std::string& top, const Eigen::VectorXd& top_feature, const EpisodeOptions& options) {
  InteractiveEpisode episode(policy, space, top_feature, options.seed, options.steps, options.stop_on_satisfaction);
  EpisodeLog log{policy.kind(), user, top, {}, false, false, {}};
  while (!episode.done()) {
    const std::size_t action = episode.propose();
    Feedback fb;
    try {
      fb = source.score(action, space.bottom_id(action));
    } catch (const std::exception& e) {
      log.aborted = true;
      log.error = e.what();
      break;
    }
    episode.feedback(fb);
  }
  log.steps = episode.steps();
  log.satisfied = episode.satisfied();
  return log;
}

void write_jsonl(std::ostream& out, const EpisodeLog& log) {
  for (const auto& s : log.steps) {
    nlohmann::json line = {{"policy", log.policy}, {"user", log.user},     {"top", log.top},
                           {"step", s.step},       {"action", s.action},   {"bottom", s.bottom_id},
                           {"raw", s.raw},         {"normalized", s.normalized}, {"reward", s.reward},
                           {"satisfied", log.satisfied}, {"aborted", log.aborted}};
    if (log.aborted) line["error"] = log.error;
    out << line.dump() << '\n';
  }
}

std::vector<EpisodeLog> read_jsonl(std::istream& in) {
  std::vector<EpisodeLog> logs;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      const EpisodeStep step{j.at("step").get<std::size_t>(), j.at("action").get<std::size_t>(),
                             j.at("bottom").get<std::string>(), j.at("raw").get<double>(),
                             j.at("normalized").get<double>(), j.at("reward").get<double>()};
      if (step.step == 1 || logs.empty()) {
        logs.push_back({j.at("policy").get<std::string>(), j.at("user").get<std::string>(),
                        j.at("top").get<std::string>(), {}, j.at("satisfied").get<bool>(),
                        j.at("aborted").get<bool>(), j.value("error", std::string())});
      }
      if (step.step != logs.back().steps.size() + 1) throw LoadError("step numbers are not consecutive");
      logs.back().steps.push_back(step);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("episode log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const LoadError& e) {
      throw LoadError("episode log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return logs;
}

}  // namespace igrec::agent
