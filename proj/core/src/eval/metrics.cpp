#include "igrec/eval/metrics.hpp"

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"
#include "igrec/common/rng.hpp"

namespace igrec::eval {
namespace {

int hit_within(const EpisodeEval& e, double threshold, std::size_t t) {
  for (std::size_t i = 0; i < t; ++i) {
    if (e.log.steps[i].raw > threshold) return 1;
  }
  return 0;
}

double threshold_of(Metric metric, const EpisodeEval& e) {
  return metric == Metric::kHitPositive ? e.positive_score : e.negative_score;
}

}  // namespace

int hp(const EpisodeEval& e) { return hit_within(e, e.positive_score, e.log.steps.size()); }

int hn(const EpisodeEval& e) { return hit_within(e, e.negative_score, e.log.steps.size()); }

int at_t(Metric metric, const EpisodeEval& e, std::size_t t) {
  if (t == 0 || t > e.log.steps.size()) {
    throw ContractError("T must lie in [1, " + std::to_string(e.log.steps.size()) + "], got " + std::to_string(t));
  }
  return hit_within(e, threshold_of(metric, e), t);
}

MetricsReport aggregate(const std::vector<EpisodeEval>& episodes, const std::string& policy) {
  if (episodes.empty()) throw ContractError("aggregate needs at least one episode");
  MetricsReport r;
  r.policy = policy;
  r.episodes = episodes.size();
  r.steps = episodes.front().log.steps.size();
  if (r.steps == 0) throw ContractError("episodes must have at least one step");
  r.hn_at.assign(r.steps, 0.0);
  r.hp_at.assign(r.steps, 0.0);
  r.mean_raw.assign(r.steps, 0.0);
  r.mean_normalized.assign(r.steps, 0.0);
  std::set<std::size_t> distinct;
  for (const auto& e : episodes) {
    if (e.log.aborted) throw ContractError("aborted episode in evaluation");
    if (e.log.steps.size() != r.steps) {
      throw ContractError("mixed episode lengths: " + std::to_string(e.log.steps.size()) + " vs " + std::to_string(r.steps));
    }
    r.hn += hn(e);
    r.hp += hp(e);
    for (std::size_t t = 0; t < r.steps; ++t) {
      const auto& s = e.log.steps[t];
      r.hn_at[t] += at_t(Metric::kHitNegative, e, t + 1);
      r.hp_at[t] += at_t(Metric::kHitPositive, e, t + 1);
      r.mean_raw[t] += s.raw;
      r.mean_normalized[t] += s.normalized;
      distinct.insert(s.action);
      r.mean_above_negative += s.raw > e.negative_score ? 1.0 : 0.0;
    }
  }
  const double n = static_cast<double>(episodes.size());
  r.hn /= n;
  r.hp /= n;
  r.mean_above_negative /= n;
  for (std::size_t t = 0; t < r.steps; ++t) {
    r.hn_at[t] /= n;
    r.hp_at[t] /= n;
    r.mean_raw[t] /= n;
    r.mean_normalized[t] /= n;
  }
  r.distinct_bottoms = distinct.size();
  return r;
}

std::vector<EpisodeEval> evaluate_policy(const agent::Policy& policy, const agent::ActionSpace& space,
                                         const proxy::ProxyScorer& scorer, const data::Dataset& dataset,
                                         const std::vector<data::OutfitQuadruple>& quadruples, std::size_t steps,
                                         std::uint64_t seed) {
  std::vector<EpisodeEval> out;
  out.reserve(quadruples.size());
  for (std::size_t i = 0; i < quadruples.size(); ++i) {
    const auto& q = quadruples[i];
    agent::ProxyFeedbackSource source(scorer, q.user, q.top);
    const agent::EpisodeOptions options{steps, false, Rng::mix(seed + i)};
    out.push_back({agent::run_episode(policy, space, source, q.user, q.top, dataset.garment(q.top).feature, options),
                   scorer.raw(q.user, q.top, q.positive), scorer.raw(q.user, q.top, q.negative)});
  }
  return out;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"policy", r.policy},
          {"episodes", r.episodes},
          {"steps", r.steps},
          {"HN", r.hn},
          {"HP", r.hp},
          {"HN_at_T", r.hn_at},
          {"HP_at_T", r.hp_at},
          {"mean_raw_score", r.mean_raw},
          {"mean_normalized_score", r.mean_normalized},
          {"distinct_bottoms", r.distinct_bottoms},
          {"mean_above_negative", r.mean_above_negative}};
}

void write_reports(const std::vector<MetricsReport>& reports, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc = {{"score_space", "raw proxy scores for HN/HP and mean_raw_score; normalized feedback reported separately"},
                        {"policies", nlohmann::json::array()}};
  std::ostringstream csv;
  csv << "policy,T,mean_score,HN_at_T,HP_at_T\n";
  csv.precision(17);
  for (const auto& r : reports) {
    doc["policies"].push_back(to_json(r));
    for (std::size_t t = 0; t < r.steps; ++t) {
      csv << r.policy << ',' << t + 1 << ',' << r.mean_raw[t] << ',' << r.hn_at[t] << ',' << r.hp_at[t] << '\n';
    }
  }
  io::write_text_file(dir / "report.json", doc.dump(2));
  io::write_text_file(dir / "curves.csv", csv.str());
}

}  // namespace igrec::eval
