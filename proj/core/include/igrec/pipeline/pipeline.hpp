#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igrec/agent/dqn.hpp"
#include "igrec/baselines/baselines.hpp"
#include "igrec/data/synthetic.hpp"
#include "igrec/eval/metrics.hpp"
#include "igrec/preprocess/autoencoder.hpp"
#include "igrec/preprocess/candidates.hpp"
#include "igrec/proxy/gpbpr.hpp"
#include "igrec/proxy/scorer.hpp"

namespace igrec::pipeline {

/// Every knob of one end-to-end run.
struct Profile {
  std::string name;
  data::SyntheticConfig synthetic;
  std::size_t users = 0, tops = 0, bottoms = 0, quadruples = 0;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  prep::AutoencoderConfig autoencoder;
  std::size_t clusters = 0;
  std::size_t kmeans_iters = 100;
  proxy::GpbprConfig proxy;
  agent::DqnConfig dqn;
  baselines::LstmConfig lstm;
  std::size_t eval_episodes = 200;  // test quadruples used, in split order
  std::size_t steps = agent::kDefaultEpisodeLength;
};

/// "tiny" (seconds, for smoke tests) or "desk" (the directional experiment).
/// Throws ContractError on an unknown name.
Profile profile(const std::string& name);

/// Applies `seed` to every stochastic stage, each with its own derived stream.
void reseed(Profile& profile, std::uint64_t seed);

nlohmann::json to_json(const Profile& profile);

/// Artifact layout under one working directory.
struct Workdir {
  std::filesystem::path root;

  std::filesystem::path dataset() const { return root / "dataset"; }
  std::filesystem::path autoencoder() const { return root / "preprocess" / "autoencoder"; }
  std::filesystem::path clustering() const { return root / "preprocess"; }
  std::filesystem::path proxy() const { return root / "proxy"; }
  std::filesystem::path agent(const std::string& kind) const { return root / "agents" / kind; }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path simulate() const { return root / "simulate"; }
  std::filesystem::path manifest(const std::string& command) const { return root / ("run_" + command + ".json"); }
};

/// Policy kinds with a trained checkpoint.
inline const std::vector<std::string> kTrainedKinds{"rl", "no-exploration", "lstm"};
/// All policy kinds, including the untrained random baseline.
inline const std::vector<std::string> kPolicyKinds{"rl", "no-exploration", "lstm", "random"};

/// Writes run_<command>.json: command, seed, profile, and FNV-1a hashes of the input files.
void write_run_manifest(const Workdir& wd, const std::string& command, const Profile& profile,
                        const std::vector<std::filesystem::path>& inputs, const nlohmann::json& outputs);

/// Frozen, mutually consistent artifacts ready for episodes.
struct Artifacts {
  std::shared_ptr<const data::Dataset> dataset;
  std::shared_ptr<const prep::Clustering> clustering;
  std::shared_ptr<const agent::ActionSpace> space;
  std::shared_ptr<const proxy::GpbprModel> proxy_model;
  std::shared_ptr<const proxy::ProxyScorer> scorer;  // null when the proxy was not loaded

  std::string candidate_hash() const;
};

/// Loads dataset and clustering, plus the proxy when `with_proxy`. Throws LoadError
/// naming the missing or inconsistent file.
Artifacts load_artifacts(const Workdir& wd, bool with_proxy);

/// Policy of `kind` from its checkpoint directory (random needs none).
/// Throws LoadError when the checkpoint is missing or trained on another candidate set.
std::shared_ptr<const agent::Policy> load_policy(const std::string& kind, const std::filesystem::path& dir,
                                                 std::shared_ptr<const agent::ActionSpace> space,
                                                 const std::string& candidate_hash);

// Stages. Each reads its inputs from `wd`, writes its artifacts and run manifest.
void synth(const Workdir& wd, const Profile& profile);
void preprocess(const Workdir& wd, const Profile& profile);
proxy::GpbprTraining train_proxy(const Workdir& wd, const Profile& profile);
void train_agent(const Workdir& wd, const Profile& profile, const std::string& kind);
std::vector<eval::MetricsReport> evaluate(const Workdir& wd, const Profile& profile,
                                          const std::vector<std::string>& kinds);
/// Runs one episode per test quadruple (up to `episodes`) and writes simulate/<kind>.jsonl.
std::vector<agent::EpisodeLog> simulate(const Workdir& wd, const Profile& profile, const std::string& kind,
                                        std::size_t episodes);

/// In-memory pipeline for one seed: world, preprocessing, proxy, all four
/// policies, and their test-set reports in the order of kPolicyKinds.
struct ExperimentResult {
  double proxy_val_auc = 0.0;
  std::size_t actions = 0;
  std::map<std::string, eval::MetricsReport> reports;
  std::map<std::string, double> seconds;  // per stage
};
ExperimentResult run_experiment(const Profile& profile);

}  // namespace igrec::pipeline
