#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"
#include "igrec/pipeline/pipeline.hpp"
#include "igrec/service/http.hpp"

namespace {

using igrec::pipeline::Profile;
using igrec::pipeline::Workdir;

constexpr int kUsageError = 2;
constexpr int kRunError = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string workdir;
  std::string profile;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-w,--workdir", c.workdir, "Artifact directory")->required();
  cmd->add_option("--profile", c.profile, "tiny or desk (default: the one recorded by synth)")
      ->check(CLI::IsMember({"tiny", "desk"}));
  cmd->add_option("--seed", c.seed, "Seed (default: the one recorded by synth)");
}

// Later stages inherit the profile and seed that synth recorded unless overridden.
Profile resolve_profile(const Common& c, bool is_synth) {
  std::string name = c.profile;
  std::optional<std::uint64_t> seed = c.seed;
  const Workdir wd{c.workdir};
  if (!is_synth && (name.empty() || !seed) && std::filesystem::exists(wd.manifest("synth"))) {
    const auto doc = nlohmann::json::parse(igrec::io::read_text_file(wd.manifest("synth")));
    if (name.empty()) name = doc.at("profile").at("name").get<std::string>();
    if (!seed) seed = doc.at("seed").get<std::uint64_t>();
  }
  Profile p = igrec::pipeline::profile(name.empty() ? "desk" : name);
  igrec::pipeline::reseed(p, seed.value_or(0));
  return p;
}

void print_reports(const std::vector<igrec::eval::MetricsReport>& reports) {
  std::cout << "policy          HN     HP     score@1  score@N  distinct\n";
  for (const auto& r : reports) {
    std::printf("%-15s %.3f  %.3f  %7.4f  %7.4f  %zu\n", r.policy.c_str(), r.hn, r.hp, r.mean_normalized.front(),
                r.mean_normalized.back(), r.distinct_bottoms);
  }
}

int serve(const std::string& config_path, std::string workdir, std::string policy, std::string bind) {
  igrec::service::ServiceConfig config;
  if (!config_path.empty()) config = igrec::service::ServiceConfig::load(config_path);
  if (!workdir.empty()) config.workdir = workdir;
  if (!policy.empty()) config.policy = policy;
  if (bind.empty()) {
    if (const char* env = std::getenv("IGREC_BIND")) bind = env;
  }
  if (!bind.empty()) {
    const auto colon = bind.rfind(':');
    const std::string port = colon == std::string::npos ? "" : bind.substr(colon + 1);
    if (port.empty() || port.find_first_not_of("0123456789") != std::string::npos || port.size() > 5) {
      throw UsageError("bind address must be host:port, got '" + bind + "'");
    }
    config.host = bind.substr(0, colon);
    config.port = std::stoi(port);
  }
  if (config.workdir.empty()) throw UsageError("serve needs --workdir or a config file naming one");

  igrec::service::SessionManager sessions(igrec::service::load_models(config.workdir, config.policy), config.options);
  igrec::service::HttpService http(sessions);
  const int port = http.bind(config.host, config.port);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread server([&] { http.run(); });
  std::cout << "listening on " << config.host << ":" << port << " (policy " << config.policy << ")" << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  http.stop();
  server.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive garment recommender: data, training, evaluation and serving"};
  app.require_subcommand(1);

  Common synth_opts, prep_opts, proxy_opts, agent_opts, eval_opts, sim_opts, all_opts;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  add_common(synth, synth_opts);

  auto* prep = app.add_subcommand("preprocess", "Train the autoencoder and cluster bottoms into candidates");
  add_common(prep, prep_opts);
  std::optional<std::size_t> clusters;
  prep->add_option("-k,--clusters", clusters, "Number of clusters (action space size)")->check(CLI::PositiveNumber);

  auto* proxy = app.add_subcommand("train-proxy", "Train the GP-BPR user proxy and fit its normalizer");
  add_common(proxy, proxy_opts);

  auto* agent = app.add_subcommand("train-agent", "Train a policy against the proxy");
  add_common(agent, agent_opts);
  std::string kind = "rl";
  std::optional<std::size_t> epochs;
  agent->add_option("--kind", kind, "rl, no-exploration or lstm")->check(CLI::IsMember({"rl", "no-exploration", "lstm"}));
  agent->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate policies on the test split; writes eval/report.json");
  add_common(evaluate, eval_opts);
  std::vector<std::string> policies{"rl", "no-exploration", "lstm", "random"};
  std::optional<std::size_t> episodes;
  evaluate->add_option("--policy", policies, "Policies to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"rl", "no-exploration", "lstm", "random"}));
  evaluate->add_option("--episodes", episodes, "Maximum test episodes")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Run proxy-driven episodes and write their logs");
  add_common(simulate, sim_opts);
  std::string sim_policy = "rl";
  std::size_t sim_episodes = 20;
  simulate->add_option("--policy", sim_policy, "Policy kind")->check(CLI::IsMember({"rl", "no-exploration", "lstm", "random"}));
  simulate->add_option("--episodes", sim_episodes, "Number of episodes")->check(CLI::PositiveNumber);

  auto* all = app.add_subcommand("all", "Run every stage from synth to evaluate");
  add_common(all, all_opts);

  auto* serve_cmd = app.add_subcommand("serve", "Serve live sessions over HTTP");
  std::string config_path, serve_workdir, serve_policy, bind;
  serve_cmd->add_option("-c,--config", config_path, "JSON service config")->check(CLI::ExistingFile);
  serve_cmd->add_option("-w,--workdir", serve_workdir, "Artifact directory (overrides the config)");
  serve_cmd->add_option("--policy", serve_policy, "Policy kind (overrides the config)")
      ->check(CLI::IsMember({"rl", "no-exploration", "lstm", "random"}));
  serve_cmd->add_option("--bind", bind, "host:port (overrides IGREC_BIND and the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*synth) {
      igrec::pipeline::synth({synth_opts.workdir}, resolve_profile(synth_opts, true));
    } else if (*prep) {
      Profile p = resolve_profile(prep_opts, false);
      if (clusters) p.clusters = *clusters;
      igrec::pipeline::preprocess({prep_opts.workdir}, p);
    } else if (*proxy) {
      const auto trained = igrec::pipeline::train_proxy({proxy_opts.workdir}, resolve_profile(proxy_opts, false));
      if (!trained.val_auc.empty()) std::cout << "validation AUC " << trained.val_auc.back() << "\n";
    } else if (*agent) {
      Profile p = resolve_profile(agent_opts, false);
      if (epochs) p.dqn.epochs = p.lstm.epochs = *epochs;
      igrec::pipeline::train_agent({agent_opts.workdir}, p, kind);
    } else if (*evaluate) {
      Profile p = resolve_profile(eval_opts, false);
      if (episodes) p.eval_episodes = *episodes;
      print_reports(igrec::pipeline::evaluate({eval_opts.workdir}, p, policies));
    } else if (*simulate) {
      const auto logs = igrec::pipeline::simulate({sim_opts.workdir}, resolve_profile(sim_opts, false), sim_policy, sim_episodes);
      std::cout << logs.size() << " episodes written to " << Workdir{sim_opts.workdir}.simulate().string() << "\n";
    } else if (*all) {
      const Workdir wd{all_opts.workdir};
      const Profile p = resolve_profile(all_opts, true);
      igrec::pipeline::synth(wd, p);
      igrec::pipeline::preprocess(wd, p);
      igrec::pipeline::train_proxy(wd, p);
      for (const auto& k : igrec::pipeline::kTrainedKinds) igrec::pipeline::train_agent(wd, p, k);
      print_reports(igrec::pipeline::evaluate(wd, p, igrec::pipeline::kPolicyKinds));
    } else if (*serve_cmd) {
      return serve(config_path, serve_workdir, serve_policy, bind);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunError;
  }
  return 0;
}
