#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "igrec/agent/episode.hpp"
#include "igrec/common/binary_io.hpp"
#include "../support/temp_dir.hpp"

namespace {

namespace fs = std::filesystem;
using igrec::testing::TempDir;

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run igrec_cli(const std::string& args) {
  const std::string command = std::string(IGREC_CLI) + " " + args + " 2>&1";
  Run run;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  char buffer[4096];
  while (const std::size_t n = std::fread(buffer, 1, sizeof buffer, pipe)) run.output.append(buffer, n);
  const int status = pclose(pipe);
  run.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return run;
}

TEST(Cli, AllOnTinyProfileWritesReport) {
  TempDir dir("cli_all");
  const auto run = igrec_cli("all -w " + dir.path().string() + " --profile tiny --seed 4");
  ASSERT_EQ(run.code, 0) << run.output;
  const auto report = nlohmann::json::parse(igrec::io::read_text_file(dir.path() / "eval" / "report.json"));
  std::set<std::string> policies;
  for (const auto& r : report.at("policies")) policies.insert(r.at("policy").get<std::string>());
  EXPECT_EQ(policies, (std::set<std::string>{"rl", "no-exploration", "lstm", "random"}));
  EXPECT_TRUE(fs::exists(dir.path() / "eval" / "curves.csv"));
  const auto manifest = nlohmann::json::parse(igrec::io::read_text_file(dir.path() / "run_evaluate.json"));
  EXPECT_EQ(manifest.at("seed"), 4);
  EXPECT_FALSE(manifest.at("inputs").empty());

  // Later stages pick the profile and seed up from the synth manifest.
  const auto sim = igrec_cli("simulate -w " + dir.path().string() + " --policy lstm --episodes 3");
  ASSERT_EQ(sim.code, 0) << sim.output;
  std::ifstream in(dir.path() / "simulate" / "lstm.jsonl");
  const auto logs = igrec::agent::read_jsonl(in);
  ASSERT_EQ(logs.size(), 3u);
  EXPECT_EQ(logs[0].steps.size(), 10u);
}

TEST(Cli, SynthIsDeterministic) {
  TempDir a("cli_synth_a"), b("cli_synth_b");
  ASSERT_EQ(igrec_cli("synth -w " + a.path().string() + " --profile tiny --seed 9").code, 0);
  ASSERT_EQ(igrec_cli("synth -w " + b.path().string() + " --profile tiny --seed 9").code, 0);
  for (const char* f : {"dataset.json", "features_top.f32", "features_bottom.f32"}) {
    EXPECT_EQ(igrec::io::fnv1a64_file(a.path() / "dataset" / f), igrec::io::fnv1a64_file(b.path() / "dataset" / f)) << f;
  }
}

TEST(Cli, MissingArtifactIsARunError) {
  TempDir dir("cli_missing");
  ASSERT_EQ(igrec_cli("synth -w " + dir.path().string() + " --profile tiny").code, 0);
  const auto run = igrec_cli("evaluate -w " + dir.path().string());
  EXPECT_EQ(run.code, 1);
  EXPECT_NE(run.output.find("missing artifact"), std::string::npos) << run.output;
  EXPECT_NE(run.output.find("clustering.json"), std::string::npos) << run.output;
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(igrec_cli("").code, 2);
  EXPECT_EQ(igrec_cli("synth").code, 2);
  EXPECT_EQ(igrec_cli("synth -w /tmp/x --profile huge").code, 2);
  EXPECT_EQ(igrec_cli("frobnicate").code, 2);
  EXPECT_EQ(igrec_cli("evaluate -w /tmp/x --policy rl,oracle").code, 2);
  EXPECT_EQ(igrec_cli("serve -w /tmp/x --bind localhost").code, 2);
  EXPECT_EQ(igrec_cli("--help").code, 0);
}

}  // namespace
