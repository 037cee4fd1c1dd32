#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igrec/agent/state.hpp"
#include "igrec/proxy/scorer.hpp"

namespace igrec::agent {

/// Per-episode decision maker. Confined to a single episode and thread.
class PolicyEpisode {
 public:
  virtual ~PolicyEpisode() = default;
  /// Next action; never one already proposed. Throws StateError when exhausted.
  virtual std::size_t next_action() = 0;
  /// Feedback (normalized, in [0, 1]) for the action just returned by next_action.
  virtual void observe(std::size_t action, double feedback) = 0;
};

/// A recommendation policy over a fixed action space. Implementations are
/// immutable and may start episodes from several threads at once.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::unique_ptr<PolicyEpisode> begin(const Eigen::VectorXd& top_feature, std::uint64_t seed) const = 0;
};

struct Feedback {
  double raw = 0.0;
  double normalized = 0.0;  // in [0, 1]
};

/// Where feedback comes from: the proxy in simulation, a person when serving.
class FeedbackSource {
 public:
  virtual ~FeedbackSource() = default;
  virtual Feedback score(std::size_t action, const std::string& bottom_id) = 0;
};

/// Scores with the frozen proxy for one (user, top).
class ProxyFeedbackSource : public FeedbackSource {
 public:
  ProxyFeedbackSource(const proxy::ProxyScorer& scorer, std::string user, std::string top)
      : scorer_(scorer), user_(std::move(user)), top_(std::move(top)) {}
  Feedback score(std::size_t action, const std::string& bottom_id) override;

 private:
  const proxy::ProxyScorer& scorer_;
  std::string user_;
  std::string top_;
};

struct EpisodeStep {
  std::size_t step = 0;  // 1-based
  std::size_t action = 0;
  std::string bottom_id;
  double raw = 0.0;
  double normalized = 0.0;
  double reward = 0.0;

  bool operator==(const EpisodeStep&) const = default;
};

struct EpisodeLog {
  std::string policy;
  std::string user;
  std::string top;
  std::vector<EpisodeStep> steps;
  bool satisfied = false;  // ended early on the satisfaction threshold
  bool aborted = false;    // the feedback source failed; steps are partial
  std::string error;

  std::vector<std::size_t> actions() const;
  bool operator==(const EpisodeLog&) const = default;
};

inline constexpr double kSatisfactionThreshold = 0.95;
inline constexpr std::size_t kDefaultEpisodeLength = 10;

/// Recommend-observe-update loop driven one step at a time, shared by run_episode and live sessions.
class InteractiveEpisode {
 public:
  /// Throws ContractError when max_steps is 0 or exceeds the action count.
  InteractiveEpisode(const Policy& policy, const ActionSpace& space, const Eigen::VectorXd& top_feature,
                     std::uint64_t seed, std::size_t max_steps, bool stop_on_satisfaction);

  /// Proposes the next bottom. Throws StateError while a proposal is pending or after done().
  std::size_t propose();
  std::optional<std::size_t> pending() const { return pending_; }

  /// Records feedback for the pending proposal and returns the logged step.
  /// Throws StateError without a pending proposal, ContractError when normalized is outside [0, 1].
  const EpisodeStep& feedback(const Feedback& fb);

  bool done() const;
  bool satisfied() const { return satisfied_; }
  std::size_t max_steps() const { return max_steps_; }
  const std::vector<EpisodeStep>& steps() const { return steps_; }

 private:
  const ActionSpace& space_;
  std::unique_ptr<PolicyEpisode> episode_;
  std::size_t max_steps_;
  bool stop_on_satisfaction_;
  std::optional<std::size_t> pending_;
  std::vector<EpisodeStep> steps_;
  bool satisfied_ = false;
};

struct EpisodeOptions {
  std::size_t steps = kDefaultEpisodeLength;
  bool stop_on_satisfaction = false;
  std::uint64_t seed = 0;
};

/// Runs one episode. A throwing feedback source aborts the episode; the partial
/// log is returned with aborted = true.
EpisodeLog run_episode(const Policy& policy, const ActionSpace& space, FeedbackSource& source, const std::string& user,
                       const std::string& top, const Eigen::VectorXd& top_feature, const EpisodeOptions& options);

/// One JSON object per step: {policy, user, top, step, action, bottom, raw, normalized, reward, satisfied, aborted}.
void write_jsonl(std::ostream& out, const EpisodeLog& log);
std::vector<EpisodeLog> read_jsonl(std::istream& in);

}  // namespace igrec::agent
