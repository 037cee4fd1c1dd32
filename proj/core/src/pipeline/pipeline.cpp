#include "igrec/pipeline/pipeline.hpp"

#include <chrono>
#include <fstream>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"
#include "igrec/common/rng.hpp"
#include "igrec/data/manifest.hpp"

namespace igrec::pipeline {
namespace {

nlohmann::json optimizer_json(const nn::OptimizerConfig& o) {
  return {{"kind", nn::to_string(o.kind)}, {"learning_rate", o.learning_rate}};
}

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) { return Rng::mix(seed * 0x100 + stage); }

void require(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw LoadError("missing artifact: " + path.string());
}

std::vector<data::OutfitQuadruple> test_quadruples(const data::Dataset& dataset, std::size_t limit) {
  auto test = dataset.quadruples_in(data::Split::kTest);
  if (test.empty()) throw ContractError("the dataset has no test quadruples");
  if (test.size() > limit) test.resize(limit);
  return test;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Profile profile(const std::string& name) {
  Profile p;
  p.name = name;
  if (name == "tiny") {
    p.synthetic.feature_dim = 16;
    p.users = 8;
    p.tops = 12;
    p.bottoms = 30;
    p.quadruples = 300;
    p.split = {0.7, 0.15, 0.15};
    p.autoencoder.epochs = 30;
    p.clusters = 12;
    p.proxy.epochs = 5;
    p.dqn.epochs = 20;
    p.dqn.episodes_per_epoch = 4;
    p.dqn.batch_size = 16;
    p.dqn.hidden_dims = {16, 16};
    p.lstm.epochs = 2;
    p.eval_episodes = 20;
  } else if (name == "desk") {
    p.users = 40;
    p.tops = 80;
    p.bottoms = 240;
    p.quadruples = 4000;
    p.clusters = 60;
    p.dqn.epochs = 1000;
    p.dqn.optimizer.learning_rate = 3e-4;
    p.eval_episodes = 200;
  } else {
    throw ContractError("unknown profile '" + name + "' (expected tiny or desk)");
  }
  reseed(p, 0);
  return p;
}

void reseed(Profile& p, std::uint64_t seed) {
  p.synthetic.seed = seed;
  p.autoencoder.seed = stage_seed(seed, 1);
  p.proxy.seed = stage_seed(seed, 2);
  p.dqn.seed = stage_seed(seed, 3);
  p.lstm.seed = stage_seed(seed, 4);
}

nlohmann::json to_json(const Profile& p) {
  const auto& s = p.synthetic;
  return {
      {"name", p.name},
      {"seed", s.seed},
      {"synthetic",
       {{"users", p.users},
        {"tops", p.tops},
        {"bottoms", p.bottoms},
        {"quadruples", p.quadruples},
        {"feature_dim", s.feature_dim},
        {"style_dim", s.style_dim},
        {"noise", s.noise},
        {"taste_weight", s.taste_weight},
        {"match_weight", s.match_weight},
        {"feature_noise", s.feature_noise},
        {"candidate_pool", s.candidate_pool},
        {"split", p.split}}},
      {"autoencoder",
       {{"hidden_dims", p.autoencoder.hidden_dims},
        {"latent_dim", p.autoencoder.latent_dim},
        {"epochs", p.autoencoder.epochs},
        {"batch_size", p.autoencoder.batch_size},
        {"optimizer", optimizer_json(p.autoencoder.optimizer)},
        {"seed", p.autoencoder.seed}}},
      {"kmeans", {{"k", p.clusters}, {"max_iters", p.kmeans_iters}}},
      {"proxy",
       {{"depth", p.proxy.depth},
        {"latent_dim", p.proxy.latent_dim},
        {"mf_dim", p.proxy.mf_dim},
        {"phi", p.proxy.phi},
        {"eta", p.proxy.eta},
        {"mu", p.proxy.mu},
        {"lambda", p.proxy.lambda},
        {"symmetric_context", p.proxy.symmetric_context},
        {"epochs", p.proxy.epochs},
        {"batch_size", p.proxy.batch_size},
        {"optimizer", optimizer_json(p.proxy.optimizer)},
        {"seed", p.proxy.seed}}},
      {"dqn",
       {{"hidden_dims", p.dqn.hidden_dims},
        {"gamma", p.dqn.gamma},
        {"replay_capacity", p.dqn.replay_capacity},
        {"batch_size", p.dqn.batch_size},
        {"target_sync", p.dqn.target_sync},
        {"optimizer", optimizer_json(p.dqn.optimizer)},
        {"epsilon", {{"start", p.dqn.schedule.start}, {"end", p.dqn.schedule.end}, {"decay", p.dqn.schedule.decay}}},
        {"epochs", p.dqn.epochs},
        {"episodes_per_epoch", p.dqn.episodes_per_epoch},
        {"seed", p.dqn.seed}}},
      {"lstm", {{"epochs", p.lstm.epochs}, {"learning_rate", p.lstm.learning_rate}, {"seed", p.lstm.seed}}},
      {"eval_episodes", p.eval_episodes},
      {"steps", p.steps}};
}

void write_run_manifest(const Workdir& wd, const std::string& command, const Profile& profile,
                        const std::vector<std::filesystem::path>& inputs, const nlohmann::json& outputs) {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& path : inputs) {
    in.push_back({{"path", std::filesystem::relative(path, wd.root).generic_string()},
                  {"fnv1a64", io::hex64(io::fnv1a64_file(path))}});
  }
  const nlohmann::json doc = {{"command", command},
                              {"seed", profile.synthetic.seed},
                              {"profile", to_json(profile)},
                              {"inputs", in},
                              {"outputs", outputs}};
  std::filesystem::create_directories(wd.root);
  io::write_text_file(wd.manifest(command), doc.dump(2));
}

std::string Artifacts::candidate_hash() const { return io::hex64(clustering->candidates.hash()); }

Artifacts load_artifacts(const Workdir& wd, bool with_proxy) {
  require(wd.dataset() / data::kManifestFile);
  require(wd.clustering() / prep::kClusteringFile);
  Artifacts a;
  a.dataset = std::make_shared<const data::Dataset>(data::load_manifest(wd.dataset()));
  a.clustering = std::make_shared<const prep::Clustering>(prep::load_clustering(wd.clustering()));
  for (const auto& [id, cluster] : a.clustering->assignment) {
    const auto* g = a.dataset->find(id);
    if (!g || g->category != data::Category::kBottom) {
      throw LoadError(wd.clustering().string() + ": clustered garment '" + id + "' is not a bottom of the dataset");
    }
  }
  a.space = std::make_shared<const agent::ActionSpace>(agent::ActionSpace::build(*a.dataset, a.clustering->candidates));
  if (with_proxy) {
    require(wd.proxy() / "gpbpr.json");
    auto loaded = proxy::load_proxy(wd.proxy());
    if (!loaded.normalizer) throw LoadError(wd.proxy().string() + ": proxy checkpoint has no fitted normalizer");
    a.proxy_model = std::make_shared<const proxy::GpbprModel>(std::move(loaded.model));
    a.scorer = std::make_shared<const proxy::ProxyScorer>(*a.proxy_model, *loaded.normalizer, *a.dataset);
  }
  return a;
}

std::shared_ptr<const agent::Policy> load_policy(const std::string& kind, const std::filesystem::path& dir,
                                                 std::shared_ptr<const agent::ActionSpace> space,
                                                 const std::string& candidate_hash) {
  if (kind == "random") return std::make_shared<baselines::RandomPolicy>(space->size());
  if (kind != "rl" && kind != "no-exploration" && kind != "lstm") {
    throw ContractError("unknown policy kind '" + kind + "'");
  }
  require(dir / agent::kAgentFile);
  if (kind == "lstm") {
    auto model = std::make_shared<const baselines::LstmRecommender>(baselines::load_lstm_recommender(dir, candidate_hash));
    if (model->action_count() != space->size()) throw LoadError(dir.string() + ": LSTM head does not match the action space");
    return std::make_shared<baselines::LstmPolicy>(std::move(model));
  }
  auto ckpt = agent::load_agent(dir, candidate_hash);
  if (ckpt.kind != kind) throw LoadError(dir.string() + ": checkpoint kind is " + ckpt.kind + ", expected " + kind);
  return std::make_shared<agent::DqnPolicy>(std::make_shared<const nn::Mlp>(std::move(ckpt.q)), std::move(space), kind);
}

void synth(const Workdir& wd, const Profile& p) {
  const auto generated = data::generate_synthetic(p.synthetic, p.users, p.tops, p.bottoms, p.quadruples);
  const auto dataset = data::split(generated.dataset, p.split, p.synthetic.seed);
  data::save_manifest(dataset, wd.dataset());
  write_run_manifest(wd, "synth", p, {}, {{"dataset", "dataset/"}, {"quadruples", dataset.quadruples.size()}});
}

void preprocess(const Workdir& wd, const Profile& p) {
  require(wd.dataset() / data::kManifestFile);
  const auto dataset = data::load_manifest(wd.dataset());
  const auto bottoms = dataset.ids(data::Category::kBottom);
  const Eigen::MatrixXd features = dataset.feature_matrix(bottoms);
  const auto trained = prep::train_autoencoder(features, p.autoencoder);
  trained.model.save(wd.autoencoder());
  const auto clustering =
      prep::cluster_bottoms(trained.model.encode(features), bottoms, {p.clusters, p.autoencoder.seed, p.kmeans_iters});
  prep::save_clustering(clustering, wd.clustering());
  write_run_manifest(wd, "preprocess", p, {wd.dataset() / data::kManifestFile},
                     {{"final_mse", trained.epoch_mse.back()},
                      {"actions", clustering.candidates.size()},
                      {"candidate_hash", io::hex64(clustering.candidates.hash())}});
}

proxy::GpbprTraining train_proxy(const Workdir& wd, const Profile& p) {
  require(wd.dataset() / data::kManifestFile);
  const auto dataset = data::load_manifest(wd.dataset());
  auto trained = proxy::train_bpr(dataset, p.proxy);
  const auto normalizer = proxy::fit_normalizer(trained.model, dataset);
  proxy::save_proxy(trained.model, normalizer, wd.proxy());
  write_run_manifest(wd, "train-proxy", p, {wd.dataset() / data::kManifestFile},
                     {{"final_loss", trained.epoch_loss.back()},
                      {"val_auc", trained.val_auc.empty() ? nlohmann::json(nullptr) : nlohmann::json(trained.val_auc.back())},
                      {"normalizer", {{"lo", normalizer.lo}, {"hi", normalizer.hi}}}});
  return trained;
}

void train_agent(const Workdir& wd, const Profile& p, const std::string& kind) {
  const Artifacts a = load_artifacts(wd, true);
  const auto dir = wd.agent(kind);
  agent::DqnConfig dqn = p.dqn;
  dqn.steps = p.steps;
  nlohmann::json outputs;
  if (kind == "rl" || kind == "no-exploration") {
    const auto trained = kind == "rl" ? agent::train_dqn(dqn, *a.dataset, *a.space, *a.scorer)
                                      : baselines::train_no_exploration(dqn, *a.dataset, *a.space, *a.scorer);
    agent::AgentCheckpoint ckpt{kind, trained.q, a.candidate_hash(), a.space->feature_dim(), dqn.gamma,
                                kind == "rl" ? dqn.schedule : agent::EpsilonSchedule::constant(0.0)};
    agent::save_agent(ckpt, dir);
    outputs = {{"updates", trained.updates}, {"epoch_mean_score", trained.epoch_mean_score}};
  } else if (kind == "lstm") {
    baselines::LstmConfig lstm = p.lstm;
    lstm.steps = p.steps;
    const auto trained = baselines::train_lstm(lstm, *a.dataset, *a.clustering, *a.space, *a.scorer);
    baselines::save_lstm_recommender(trained.model, a.candidate_hash(), dir);
    outputs = {{"epoch_loss", trained.epoch_loss}};
  } else {
    throw ContractError("cannot train policy kind '" + kind + "' (expected rl, no-exploration or lstm)");
  }
  write_run_manifest(wd, "train-agent-" + kind, p,
                     {wd.dataset() / data::kManifestFile, wd.clustering() / prep::kClusteringFile,
                      wd.proxy() / "gpbpr.json"},
                     outputs);
}

std::vector<eval::MetricsReport> evaluate(const Workdir& wd, const Profile& p, const std::vector<std::string>& kinds) {
  const Artifacts a = load_artifacts(wd, true);
  std::vector<std::shared_ptr<const agent::Policy>> policies;
  for (const auto& kind : kinds) policies.push_back(load_policy(kind, wd.agent(kind), a.space, a.candidate_hash()));
  const auto test = test_quadruples(*a.dataset, p.eval_episodes);
  std::vector<eval::MetricsReport> reports;
  std::filesystem::create_directories(wd.eval());
  std::ofstream episodes(wd.eval() / "episodes.jsonl");
  for (const auto& policy : policies) {
    const auto evals = eval::evaluate_policy(*policy, *a.space, *a.scorer, *a.dataset, test, p.steps, p.synthetic.seed);
    for (const auto& e : evals) agent::write_jsonl(episodes, e.log);
    reports.push_back(eval::aggregate(evals, policy->kind()));
  }
  eval::write_reports(reports, wd.eval());
  std::vector<std::filesystem::path> inputs{wd.dataset() / data::kManifestFile, wd.clustering() / prep::kClusteringFile,
                                            wd.proxy() / "gpbpr.json"};
  for (const auto& kind : kinds) {
    if (kind != "random") inputs.push_back(wd.agent(kind) / agent::kAgentFile);
  }
  write_run_manifest(wd, "evaluate", p, inputs, {{"report", "eval/report.json"}, {"curves", "eval/curves.csv"}});
  return reports;
}

std::vector<agent::EpisodeLog> simulate(const Workdir& wd, const Profile& p, const std::string& kind,
                                        std::size_t episodes) {
  const Artifacts a = load_artifacts(wd, true);
  const auto policy = load_policy(kind, wd.agent(kind), a.space, a.candidate_hash());
  const auto test = test_quadruples(*a.dataset, episodes);
  std::vector<agent::EpisodeLog> logs;
  std::filesystem::create_directories(wd.simulate());
  std::ofstream out(wd.simulate() / (kind + ".jsonl"));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& q = test[i];
    agent::ProxyFeedbackSource source(*a.scorer, q.user, q.top);
    logs.push_back(agent::run_episode(*policy, *a.space, source, q.user, q.top, a.dataset->garment(q.top).feature,
                                      {p.steps, false, Rng::mix(p.synthetic.seed + i)}));
    agent::write_jsonl(out, logs.back());
  }
  std::vector<std::filesystem::path> inputs{wd.dataset() / data::kManifestFile, wd.clustering() / prep::kClusteringFile,
                                            wd.proxy() / "gpbpr.json"};
  if (kind != "random") inputs.push_back(wd.agent(kind) / agent::kAgentFile);
  write_run_manifest(wd, "simulate", p, inputs, {{"episodes", logs.size()}, {"log", "simulate/" + kind + ".jsonl"}});
  return logs;
}

ExperimentResult run_experiment(const Profile& p) {
  ExperimentResult result;
  auto clock = std::chrono::steady_clock::now();
  const auto generated = data::generate_synthetic(p.synthetic, p.users, p.tops, p.bottoms, p.quadruples);
  const auto dataset = data::split(generated.dataset, p.split, p.synthetic.seed);
  const auto bottoms = dataset.ids(data::Category::kBottom);
  const Eigen::MatrixXd features = dataset.feature_matrix(bottoms);
  const auto ae = prep::train_autoencoder(features, p.autoencoder);
  const auto clustering =
      prep::cluster_bottoms(ae.model.encode(features), bottoms, {p.clusters, p.autoencoder.seed, p.kmeans_iters});
  const auto space = std::make_shared<const agent::ActionSpace>(agent::ActionSpace::build(dataset, clustering.candidates));
  result.actions = space->size();
  result.seconds["preprocess"] = seconds_since(clock);

  clock = std::chrono::steady_clock::now();
  const auto proxy_training = proxy::train_bpr(dataset, p.proxy);
  if (!proxy_training.val_auc.empty()) result.proxy_val_auc = proxy_training.val_auc.back();
  const proxy::ProxyScorer scorer(proxy_training.model, proxy::fit_normalizer(proxy_training.model, dataset), dataset);
  result.seconds["proxy"] = seconds_since(clock);

  agent::DqnConfig dqn = p.dqn;
  dqn.steps = p.steps;
  std::map<std::string, std::shared_ptr<const agent::Policy>> policies;
  for (const std::string kind : {"rl", "no-exploration"}) {
    clock = std::chrono::steady_clock::now();
    auto trained = kind == "rl" ? agent::train_dqn(dqn, dataset, *space, scorer)
                                : baselines::train_no_exploration(dqn, dataset, *space, scorer);
    policies[kind] = std::make_shared<agent::DqnPolicy>(std::make_shared<const nn::Mlp>(std::move(trained.q)), space, kind);
    result.seconds[kind] = seconds_since(clock);
  }
  clock = std::chrono::steady_clock::now();
  baselines::LstmConfig lstm = p.lstm;
  lstm.steps = p.steps;
  policies["lstm"] = std::make_shared<baselines::LstmPolicy>(std::make_shared<const baselines::LstmRecommender>(
      baselines::train_lstm(lstm, dataset, clustering, *space, scorer).model));
  result.seconds["lstm"] = seconds_since(clock);
  policies["random"] = std::make_shared<baselines::RandomPolicy>(space->size());

  clock = std::chrono::steady_clock::now();
  const auto test = test_quadruples(dataset, p.eval_episodes);
  for (const auto& kind : kPolicyKinds) {
    result.reports[kind] =
        eval::aggregate(eval::evaluate_policy(*policies.at(kind), *space, scorer, dataset, test, p.steps, p.synthetic.seed), kind);
  }
  result.seconds["evaluate"] = seconds_since(clock);
  return result;
}

}  // namespace igrec::pipeline
