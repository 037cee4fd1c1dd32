#include <gtest/gtest.h>

#include "igrec/pipeline/pipeline.hpp"

namespace igrec::pipeline {
namespace {

// Noise-free world with 4 users and 8 candidate bottoms, where taste outweighs
// the top match so that feedback is what tells users apart.
Profile small_world(std::uint64_t seed) {
  Profile p = profile("tiny");
  p.synthetic.match_weight = 0.1;
  p.users = 4;
  p.tops = 80;
  p.bottoms = 24;
  p.quadruples = 300;
  p.clusters = 8;
  p.steps = 3;
  p.proxy.epochs = 30;
  p.dqn.epochs = 600;
  p.dqn.hidden_dims = {32, 32};
  p.lstm.epochs = 1;
  p.eval_episodes = 200;
  reseed(p, seed);
  return p;
}

class DqnTraining : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(DqnTraining, LastStepScoresAboveTheFirst) {
  const auto result = run_experiment(small_world(GetParam()));
  ASSERT_EQ(result.actions, 8u);
  const auto& rl = result.reports.at("rl");
  EXPECT_GT(rl.mean_normalized.back(), rl.mean_normalized.front());
  EXPECT_GE(rl.hp, result.reports.at("random").hp);
}

INSTANTIATE_TEST_SUITE_P(Seeds, DqnTraining, ::testing::Values(1, 2, 3));

}  // namespace
}  // namespace igrec::pipeline
