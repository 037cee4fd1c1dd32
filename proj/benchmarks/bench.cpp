#include <benchmark/benchmark.h>

#include "igrec/agent/dqn.hpp"
#include "igrec/agent/episode.hpp"
#include "igrec/common/rng.hpp"
#include "igrec/data/synthetic.hpp"
#include "igrec/preprocess/kmeans.hpp"
#include "igrec/proxy/gpbpr.hpp"
#include "igrec/proxy/scorer.hpp"

namespace {

using namespace igrec;

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (auto& x : m.reshaped()) x = rng.normal();
  return m;
}

// Q-network forward at desk width (args: feature dim, actions).
void BM_QForward(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0)), actions = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const nn::Mlp q = agent::make_q_network(dim, {64, 64}, actions, rng);
  const Eigen::VectorXd s = random_matrix(static_cast<Eigen::Index>(dim), 1, 2).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(q.forward(s));
}
BENCHMARK(BM_QForward)->Args({32, 60})->Args({32, 120})->Args({2048, 1500});

// One TD loss and gradient over a batch of 64 transitions.
void BM_TdLossBatch(benchmark::State& state) {
  const std::size_t dim = 32, actions = 60;
  Rng rng(3);
  const nn::Mlp q = agent::make_q_network(dim, {64, 64}, actions, rng);
  std::vector<agent::Transition> ts;
  for (int i = 0; i < 64; ++i) {
    std::vector<bool> mask(actions, false);
    mask[rng.index(actions)] = true;
    ts.push_back({random_matrix(dim, 1, 10 + i).col(0), rng.index(actions), rng.uniform(-1, 1),
                  random_matrix(dim, 1, 100 + i).col(0), i % 10 == 9, mask});
  }
  std::vector<const agent::Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  nn::MlpGradients grads;
  for (auto _ : state) benchmark::DoNotOptimize(agent::td_loss(q, q, batch, 0.9, &grads));
}
BENCHMARK(BM_TdLossBatch);

void BM_KMeans(benchmark::State& state) {
  const Eigen::MatrixXd points = random_matrix(16, state.range(0), 4);
  for (auto _ : state) benchmark::DoNotOptimize(prep::kmeans(points, {60, 1, 100}));
}
BENCHMARK(BM_KMeans)->Arg(240)->Arg(1500)->Unit(benchmark::kMillisecond);

// Proxy feedback for one (user, top, bottom) triple on a trained toy proxy.
void BM_ProxyFeedback(benchmark::State& state) {
  data::SyntheticConfig sc;
  sc.seed = 5;
  const data::Dataset ds = data::split(data::generate_synthetic(sc, 10, 20, 40, 200).dataset, {0.7, 0.15, 0.15}, 5);
  proxy::GpbprConfig config;
  config.epochs = 2;
  auto model = proxy::train_bpr(ds, config).model;
  const auto normalizer = proxy::fit_normalizer(model, ds);
  const proxy::ProxyScorer scorer(std::move(model), normalizer, ds);
  const auto& q = ds.quadruples.front();
  for (auto _ : state) benchmark::DoNotOptimize(scorer.feedback(q.user, q.top, q.positive));
}
BENCHMARK(BM_ProxyFeedback);

}  // namespace

BENCHMARK_MAIN();
