#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "igrec/agent/episode.hpp"
#include "igrec/data/dataset.hpp"
#include "igrec/proxy/scorer.hpp"

namespace igrec::eval {

/// An episode together with the raw proxy scores of the dataset's positive and negative bottoms.
struct EpisodeEval {
  agent::EpisodeLog log;
  double positive_score = 0.0;
  double negative_score = 0.0;
};

enum class Metric { kHitNegative, kHitPositive };

/// 1 iff some step's raw score is strictly above the positive score.
int hp(const EpisodeEval& e);
/// 1 iff some step's raw score is strictly above the negative score.
int hn(const EpisodeEval& e);
/// The metric restricted to steps 1..T. Throws ContractError unless 1 <= T <= steps.
int at_t(Metric metric, const EpisodeEval& e, std::size_t t);

struct MetricsReport {
  std::string policy;
  std::size_t episodes = 0;
  std::size_t steps = 0;
  double hn = 0.0;
  double hp = 0.0;
  std::vector<double> hn_at;            // index T-1
  std::vector<double> hp_at;
  std::vector<double> mean_raw;         // mean raw score at step T
  std::vector<double> mean_normalized;  // mean feedback at step T
  std::size_t distinct_bottoms = 0;     // |union of proposed actions|
  double mean_above_negative = 0.0;     // per-episode count of steps beating the negative
};

/// Means over episodes. Throws ContractError when empty, when lengths differ, or on aborted logs.
MetricsReport aggregate(const std::vector<EpisodeEval>& episodes, const std::string& policy);

/// One evaluation episode per quadruple of `split`, with per-episode seeds derived from `seed`.
std::vector<EpisodeEval> evaluate_policy(const agent::Policy& policy, const agent::ActionSpace& space,
                                         const proxy::ProxyScorer& scorer, const data::Dataset& dataset,
                                         const std::vector<data::OutfitQuadruple>& quadruples, std::size_t steps,
                                         std::uint64_t seed);

nlohmann::json to_json(const MetricsReport& report);

/// report.json (all fields, plus a note that comparisons use raw scores) and
/// curves.csv with columns policy,T,mean_score,HN_at_T,HP_at_T.
void write_reports(const std::vector<MetricsReport>& reports, const std::filesystem::path& dir);

}  // namespace igrec::eval
