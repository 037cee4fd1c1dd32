#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "igrec/agent/dqn.hpp"
#include "igrec/agent/episode.hpp"
#include "igrec/agent/state.hpp"
#include "igrec/baselines/baselines.hpp"
#include "igrec/common/error.hpp"
#include "igrec/nn/gradcheck.hpp"
#include "../support/temp_dir.hpp"

namespace igrec::agent {
namespace {

Eigen::VectorXd random_vector(std::size_t n, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = rng.normal();
  return v;
}

// Action space over made-up bottoms "b0".."b{n-1}" with random features.
std::shared_ptr<ActionSpace> toy_space(std::size_t actions, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  auto space = std::make_shared<ActionSpace>();
  space->features.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(actions));
  for (std::size_t a = 0; a < actions; ++a) {
    space->candidates.items.push_back({"b" + std::to_string(a), a});
    space->features.col(static_cast<Eigen::Index>(a)) = random_vector(dim, rng);
  }
  return space;
}

// Q-network whose output ignores the state: zero weights, bias = q.
nn::Mlp constant_q(const std::vector<double>& q, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(q.size());
  nn::DenseLayer layer{Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(dim)),
                       Eigen::Map<const Eigen::VectorXd>(q.data(), n), nn::Activation::kIdentity};
  return nn::Mlp({layer});
}

// Feedback from a fixed per-action table; optionally fails on a given call.
class TableSource : public FeedbackSource {
 public:
  explicit TableSource(std::vector<double> table, std::size_t fail_at = SIZE_MAX)
      : table_(std::move(table)), fail_at_(fail_at) {}
  Feedback score(std::size_t action, const std::string&) override {
    if (calls_++ == fail_at_) throw std::runtime_error("rater went away");
    return {table_.at(action) * 4.0 - 2.0, table_.at(action)};
  }

 private:
  std::vector<double> table_;
  std::size_t fail_at_;
  std::size_t calls_ = 0;
};

TEST(EpsilonSchedule, DefaultsMatchClosedForm) {
  const EpsilonSchedule eps;
  EXPECT_EQ(eps.at(0), 0.9);
  EXPECT_NEAR(eps.at(200), 0.25 + 0.65 / 2.718281828459045, 1e-9);
  EXPECT_NEAR(eps.at(200), 0.48912163676, 1e-9);
  EXPECT_LT(eps.at(1e6) - 0.25, 1e-6);
  EXPECT_GE(eps.at(1e6), 0.25);
}

TEST(EpsilonSchedule, StrictlyDecreasingWithinBounds) {
  const EpsilonSchedule eps;
  for (int i = 0; i < 3000; ++i) {
    EXPECT_LT(eps.at(i + 1), eps.at(i));
    EXPECT_LE(eps.at(i), eps.start);
    EXPECT_GE(eps.at(i), eps.end);
  }
}

TEST(EpsilonSchedule, ConstantAndValidation) {
  const auto zero = EpsilonSchedule::constant(0.0);
  EXPECT_NO_THROW(zero.validate());
  for (int i : {0, 1, 50, 100000}) EXPECT_EQ(zero.at(i), 0.0);
  EXPECT_THROW((EpsilonSchedule{0.2, 0.3, 10}.validate()), ContractError);
  EXPECT_THROW((EpsilonSchedule{1.5, 0.3, 10}.validate()), ContractError);
  EXPECT_THROW((EpsilonSchedule{0.9, 0.25, 0}.validate()), ContractError);
}

TEST(InitEpisode, StateIsTopFeature) {
  Rng rng(1);
  const Eigen::VectorXd top = random_vector(6, rng);
  const AgentState s = init_episode(top, 6, 4);
  EXPECT_EQ(s.s, top);
  EXPECT_EQ(s.step(), 0u);
  EXPECT_EQ(s.remaining(), 4u);
  EXPECT_EQ(init_episode(Eigen::VectorXd::Zero(6), 6, 4).s, Eigen::VectorXd::Zero(6));
  EXPECT_THROW(init_episode(top, 5, 4), ShapeError);
}

TEST(UpdateState, ZeroFeedbackOnlyMarksAction) {
  Rng rng(2);
  const Eigen::VectorXd top = random_vector(5, rng);
  AgentState s = init_episode(top, 5, 3);
  update_state(s, 1, 0.0, random_vector(5, rng));
  EXPECT_EQ(s.s, top);
  EXPECT_TRUE(s.is_proposed(1));
  EXPECT_EQ(s.proposed, std::vector<std::size_t>{1});
}

TEST(UpdateState, UnitFeedbackOnTopFeatureDoubles) {
  Rng rng(3);
  const Eigen::VectorXd top = random_vector(5, rng);
  AgentState s = init_episode(top, 5, 3);
  update_state(s, 0, 1.0, top);
  EXPECT_EQ(s.s, 2.0 * top);
}

TEST(UpdateState, MatchesDirectSummation) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 1 + rng.index(9), actions = 2 + rng.index(10);
    const auto space = toy_space(actions, dim, rng.next_u64());
    const Eigen::VectorXd top = random_vector(dim, rng);
    AgentState s = init_episode(top, dim, actions);
    std::vector<std::size_t> order(actions);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span(order));
    const std::size_t k = 1 + rng.index(actions);
    std::vector<double> p(k);
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = rng.uniform();
      update_state(s, order[i], p[i], space->features.col(static_cast<Eigen::Index>(order[i])));
    }
    Eigen::VectorXd expected = top;
    for (std::size_t i = 0; i < k; ++i) {
      for (Eigen::Index d = 0; d < expected.size(); ++d) expected(d) += p[i] * space->features(d, static_cast<Eigen::Index>(order[i]));
    }
    EXPECT_EQ(s.s, expected);
    EXPECT_EQ(s.step(), k);
  }
}

TEST(UpdateState, RejectsRepeatsRangeAndFeedback) {
  AgentState s = init_episode(Eigen::VectorXd::Zero(2), 2, 3);
  update_state(s, 0, 0.5, Eigen::VectorXd::Ones(2));
  EXPECT_THROW(update_state(s, 0, 0.5, Eigen::VectorXd::Ones(2)), ContractError);
  EXPECT_THROW(update_state(s, 3, 0.5, Eigen::VectorXd::Ones(2)), ContractError);
  EXPECT_THROW(update_state(s, 1, 1.01, Eigen::VectorXd::Ones(2)), ContractError);
  EXPECT_THROW(update_state(s, 1, -0.01, Eigen::VectorXd::Ones(2)), ContractError);
  EXPECT_THROW(update_state(s, 1, std::nan(""), Eigen::VectorXd::Ones(2)), ContractError);
  EXPECT_THROW(update_state(s, 1, 0.5, Eigen::VectorXd::Ones(3)), ShapeError);
}

TEST(Reward, DifferencesAndFirstStepBaseline) {
  EXPECT_NEAR(reward(0.4, 0.7), 0.3, 1e-15);
  EXPECT_EQ(reward(0.6, 0.6), 0.0);
  EXPECT_EQ(reward(std::nullopt, 0.5), 0.0);
  EXPECT_EQ(reward(std::nullopt, 0.9), 0.9 - kRewardBaseline);
}

TEST(MaskedArgmax, ExhaustiveOverFiveActionSubsets) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(5);
    // Values from a small set so ties are common.
    for (auto& x : q) x = static_cast<double>(rng.index(3));
    for (unsigned bits = 0; bits < 32; ++bits) {
      std::vector<bool> mask(5);
      std::vector<std::pair<double, std::size_t>> open;
      for (std::size_t a = 0; a < 5; ++a) {
        mask[a] = (bits >> a) & 1u;
        if (!mask[a]) open.emplace_back(-q(static_cast<Eigen::Index>(a)), a);
      }
      if (open.empty()) {
        EXPECT_THROW(masked_argmax(q, mask), StateError);
        continue;
      }
      const std::size_t expected = std::min_element(open.begin(), open.end())->second;
      const std::size_t got = masked_argmax(q, mask);
      EXPECT_EQ(got, expected);
      EXPECT_FALSE(mask[got]);
    }
  }
}

TEST(SelectAction, GreedyPicksArgmaxThenMasks) {
  const nn::Mlp q = constant_q({0.1, 0.9, 0.3}, 2);
  AgentState s = init_episode(Eigen::VectorXd::Zero(2), 2, 3);
  Rng rng(6);
  EXPECT_EQ(select_action(q, s, 0.0, rng), 1u);
  update_state(s, 1, 0.5, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(select_action(q, s, 0.0, rng), 2u);
}

TEST(SelectAction, GreedyDoesNotConsumeRandomness) {
  const nn::Mlp q = constant_q({0.1, 0.9, 0.3}, 2);
  const AgentState s = init_episode(Eigen::VectorXd::Zero(2), 2, 3);
  Rng used(7), fresh(7);
  select_action(q, s, 0.0, used);
  EXPECT_EQ(used.next_u64(), fresh.next_u64());
}

TEST(SelectAction, FullExplorationIsUniformOverOpenActions) {
  const nn::Mlp q = constant_q({0.1, 0.9, 0.3, 0.2, 0.0}, 2);
  AgentState s = init_episode(Eigen::VectorXd::Zero(2), 2, 5);
  update_state(s, 1, 0.5, Eigen::VectorXd::Zero(2));
  update_state(s, 3, 0.5, Eigen::VectorXd::Zero(2));
  Rng rng(8);
  const int draws = 10000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < draws; ++i) ++counts[select_action(q, s, 1.0, rng)];
  EXPECT_EQ(counts[1] + counts[3], 0);
  const double p = 1.0 / 3.0, sigma = std::sqrt(draws * p * (1 - p));
  for (std::size_t a : {0, 2, 4}) EXPECT_LT(std::abs(counts[a] - draws * p), 3 * sigma) << "action " << a;
}

TEST(SelectAction, ExhaustedSpaceThrows) {
  const nn::Mlp q = constant_q({0.1}, 2);
  AgentState s = init_episode(Eigen::VectorXd::Zero(2), 2, 1);
  update_state(s, 0, 0.5, Eigen::VectorXd::Zero(2));
  Rng rng(9);
  EXPECT_THROW(select_action(q, s, 0.0, rng), StateError);
  EXPECT_THROW(select_action(q, s, 1.0, rng), StateError);
}

TEST(ReplayMemory, RingBufferOverwritesOldest) {
  ReplayMemory memory(3);
  for (int i = 0; i < 5; ++i) memory.push({Eigen::VectorXd::Zero(1), 0, static_cast<double>(i), {}, true, {}});
  ASSERT_EQ(memory.size(), 3u);
  EXPECT_EQ(memory.at(0).reward, 3.0);
  EXPECT_EQ(memory.at(1).reward, 4.0);
  EXPECT_EQ(memory.at(2).reward, 2.0);
  EXPECT_THROW(ReplayMemory(0), ContractError);
}

TEST(ReplayMemory, SamplingNeedsABatchWorth) {
  ReplayMemory memory(10);
  Rng rng(10);
  memory.push({Eigen::VectorXd::Zero(1), 0, 0.0, {}, true, {}});
  EXPECT_THROW(memory.sample(2, rng), StateError);
  memory.push({Eigen::VectorXd::Zero(1), 0, 1.0, {}, true, {}});
  EXPECT_EQ(memory.sample(2, rng).size(), 2u);
  std::array<int, 2> counts{};
  for (int i = 0; i < 4000; ++i) ++counts[static_cast<std::size_t>(memory.sample(1, rng)[0]->reward)];
  EXPECT_LT(std::abs(counts[0] - 2000), 3 * std::sqrt(1000.0));
}

TEST(TdTarget, GammaZeroIsReward) {
  Rng rng(11);
  const nn::Mlp q = make_q_network(3, {4}, 4, rng);
  const Transition t{random_vector(3, rng), 2, 0.37, random_vector(3, rng), false, {false, false, true, false}};
  EXPECT_EQ(td_target(q, t, 0.0), 0.37);
  std::vector<const Transition*> batch{&t};
  const double expected = 0.5 * std::pow(q.forward(t.state)(2) - 0.37, 2);
  EXPECT_NEAR(td_loss(q, q, batch, 0.0, nullptr), expected, 1e-15);
}

TEST(TdTarget, MaxRunsOverUnmaskedActionsOnly) {
  const nn::Mlp target = constant_q({5.0, 1.0, 2.0, -1.0}, 2);
  Transition t{Eigen::VectorXd::Zero(2), 0, 0.25, Eigen::VectorXd::Zero(2), false, {true, false, false, true}};
  EXPECT_DOUBLE_EQ(td_target(target, t, 0.5), 0.25 + 0.5 * 2.0);
  t.terminal = true;
  EXPECT_EQ(td_target(target, t, 0.5), 0.25);
  t.terminal = false;
  t.next_mask = {true, true, true, true};
  EXPECT_EQ(td_target(target, t, 0.5), 0.25);
}

TEST(TdLoss, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  nn::Mlp q = make_q_network(8, {6, 5}, 4, rng);
  const nn::Mlp target = make_q_network(8, {6, 5}, 4, rng);
  std::vector<Transition> ts;
  for (int i = 0; i < 6; ++i) {
    std::vector<bool> mask(4, false);
    mask[rng.index(4)] = true;
    ts.push_back({random_vector(8, rng), rng.index(4), rng.uniform(-1, 1), random_vector(8, rng), i == 5, mask});
  }
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  nn::MlpGradients grads;
  td_loss(q, target, batch, 0.9, &grads);
  nn::ParamBlocks blocks;
  q.append_blocks("q", grads, blocks);
  const auto result = nn::check_gradients(blocks, [&] { return td_loss(q, target, batch, 0.9, nullptr); });
  EXPECT_LT(result.max_relative_error, 1e-4) << result.worst_parameter;
}

TEST(DqnPolicy, RejectsMismatchedNetwork) {
  Rng rng(13);
  const auto space = toy_space(4, 3, 1);
  EXPECT_THROW(DqnPolicy(std::make_shared<nn::Mlp>(make_q_network(3, {4}, 5, rng)), space), ShapeError);
  EXPECT_THROW(DqnPolicy(nullptr, space), ContractError);
}

TEST(RunEpisode, SingleStepAndFullPermutation) {
  Rng rng(14);
  const auto space = toy_space(7, 3, 2);
  const DqnPolicy policy(std::make_shared<nn::Mlp>(make_q_network(3, {5}, 7, rng)), space);
  TableSource source({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
  const auto one = run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Ones(3), {1, false, 0});
  EXPECT_EQ(one.steps.size(), 1u);
  EXPECT_EQ(one.steps[0].step, 1u);
  const auto all = run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Ones(3), {7, false, 0});
  auto actions = all.actions();
  std::sort(actions.begin(), actions.end());
  EXPECT_EQ(actions, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Ones(3), {8, false, 0}), ContractError);
  EXPECT_THROW(run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Ones(3), {0, false, 0}), ContractError);
}

TEST(RunEpisode, GreedyRerunIsIdentical) {
  Rng rng(15);
  const auto space = toy_space(9, 4, 3);
  const DqnPolicy policy(std::make_shared<nn::Mlp>(make_q_network(4, {8}, 9, rng)), space);
  const Eigen::VectorXd top = random_vector(4, rng);
  TableSource a({0.9, 0.1, 0.4, 0.3, 0.8, 0.2, 0.6, 0.5, 0.7});
  TableSource b({0.9, 0.1, 0.4, 0.3, 0.8, 0.2, 0.6, 0.5, 0.7});
  EXPECT_EQ(run_episode(policy, *space, a, "u", "t", top, {6, false, 1}),
            run_episode(policy, *space, b, "u", "t", top, {6, false, 999}));
}

TEST(RunEpisode, FailingSourceAbortsWithPartialLog) {
  const auto space = toy_space(5, 2, 4);
  const baselines::RandomPolicy policy(5);
  TableSource source({0.1, 0.2, 0.3, 0.4, 0.5}, 3);
  const auto log = run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Zero(2), {5, false, 2});
  EXPECT_TRUE(log.aborted);
  EXPECT_EQ(log.steps.size(), 3u);
  EXPECT_EQ(log.error, "rater went away");
}

TEST(RunEpisode, SatisfactionStopsOnlyWhenRequested) {
  const auto space = toy_space(4, 2, 5);
  const DqnPolicy policy(std::make_shared<nn::Mlp>(constant_q({3, 2, 1, 0}, 2)), space);
  TableSource source({0.2, 0.96, 0.3, 0.4});
  const auto stopped = run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Zero(2), {4, true, 0});
  EXPECT_TRUE(stopped.satisfied);
  EXPECT_EQ(stopped.steps.size(), 2u);
  const auto full = run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Zero(2), {4, false, 0});
  EXPECT_FALSE(full.satisfied);
  EXPECT_EQ(full.steps.size(), 4u);
}

// Dyadic feedback keeps every difference exact, so the telescoping identity holds bit for bit.
TEST(RunEpisode, RewardsTelescopeToFinalScore) {
  Rng rng(16);
  const auto space = toy_space(12, 3, 6);
  const baselines::RandomPolicy policy(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> table(12);
    for (auto& x : table) x = static_cast<double>(rng.index(1025)) / 1024.0;
    TableSource source(table);
    const auto log = run_episode(policy, *space, source, "u", "t", Eigen::VectorXd::Zero(3), {1 + rng.index(12), false, rng.next_u64()});
    double total = 0.0;
    for (const auto& s : log.steps) total += s.reward;
    EXPECT_EQ(total, log.steps.back().normalized - kRewardBaseline);
  }
}

TEST(RunEpisode, NoRepeatsOverThousandRandomEpisodes) {
  Rng rng(17);
  const auto space = toy_space(15, 4, 7);
  const DqnPolicy explorer(std::make_shared<nn::Mlp>(make_q_network(4, {8}, 15, rng)), space, "rl", 0.5);
  const baselines::RandomPolicy random(15);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> table(15);
    for (auto& x : table) x = rng.uniform();
    TableSource source(table);
    const Policy& policy = i % 2 ? static_cast<const Policy&>(explorer) : random;
    const auto log =
        run_episode(policy, *space, source, "u", "t", random_vector(4, rng), {1 + rng.index(15), false, rng.next_u64()});
    const auto actions = log.actions();
    EXPECT_EQ(std::set<std::size_t>(actions.begin(), actions.end()).size(), actions.size());
    double total = 0.0;
    for (const auto& s : log.steps) total += s.reward;
    EXPECT_NEAR(total, log.steps.back().normalized - kRewardBaseline, 1e-12);
  }
}

TEST(InteractiveEpisode, ProtocolErrors) {
  const auto space = toy_space(3, 2, 8);
  const baselines::RandomPolicy policy(3);
  InteractiveEpisode episode(policy, *space, Eigen::VectorXd::Zero(2), 1, 2, false);
  EXPECT_THROW(episode.feedback({0.0, 0.5}), StateError);
  episode.propose();
  EXPECT_THROW(episode.propose(), StateError);
  EXPECT_THROW(episode.feedback({0.0, 1.5}), ContractError);
  episode.feedback({0.0, 0.5});
  episode.propose();
  episode.feedback({0.0, 0.25});
  EXPECT_TRUE(episode.done());
  EXPECT_THROW(episode.propose(), StateError);
  EXPECT_EQ(episode.steps()[1].reward, -0.25);
  EXPECT_THROW(InteractiveEpisode(baselines::RandomPolicy(4), *space, Eigen::VectorXd::Zero(2), 1, 2, false), ShapeError);
}

TEST(EpisodeLogJsonl, RoundTrip) {
  const auto space = toy_space(6, 2, 9);
  const baselines::RandomPolicy policy(6);
  TableSource source({0.3, 0.1, 0.7, 0.123456789012345, 1.0, 0.0});
  std::vector<EpisodeLog> logs;
  for (std::uint64_t seed : {1, 2, 3}) logs.push_back(run_episode(policy, *space, source, "u1", "t9", Eigen::VectorXd::Zero(2), {4, false, seed}));
  TableSource failing({0.3, 0.1, 0.7, 0.2, 1.0, 0.0}, 2);
  logs.push_back(run_episode(policy, *space, failing, "u2", "t1", Eigen::VectorXd::Zero(2), {4, false, 4}));
  std::stringstream buffer;
  for (const auto& log : logs) write_jsonl(buffer, log);
  EXPECT_EQ(read_jsonl(buffer), logs);
  std::stringstream broken("{\"step\": 2}\n");
  EXPECT_THROW(read_jsonl(broken), LoadError);
}

TEST(AgentCheckpoint, RoundTripKeepsDimsAndHash) {
  testing::TempDir dir("agent_ckpt");
  Rng rng(18);
  AgentCheckpoint ckpt{"rl", make_q_network(5, {7, 6}, 11, rng), "00000000deadbeef", 5, 0.8, {0.9, 0.1, 50}};
  save_agent(ckpt, dir.path());
  const auto loaded = load_agent(dir.path(), "00000000deadbeef");
  EXPECT_EQ(loaded.q.out_dim(), 11u);
  EXPECT_EQ(loaded.q.in_dim(), 5u);
  EXPECT_EQ(loaded.gamma, 0.8);
  EXPECT_EQ(loaded.schedule.decay, 50.0);
  const Eigen::VectorXd x = random_vector(5, rng);
  EXPECT_NEAR((loaded.q.forward(x) - ckpt.q.forward(x)).cwiseAbs().maxCoeff(), 0.0, 1e-5);
  save_agent(loaded, dir.path());
  EXPECT_EQ(load_agent(dir.path()).q.forward(x), loaded.q.forward(x));
  EXPECT_THROW(load_agent(dir.path(), "0000000000000001"), LoadError);
  std::filesystem::remove(dir.path() / "q.ckpt");
  EXPECT_THROW(load_agent(dir.path()), LoadError);
}

}  // namespace
}  // namespace igrec::agent
