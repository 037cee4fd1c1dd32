#pragma once

#include <map>
#include <string>
#include <string_view>

#include "igrec/data/dataset.hpp"
#include "igrec/proxy/gpbpr.hpp"

namespace igrec::proxy {

/// Frozen proxy with every garment's projected latents precomputed.
///
/// Immutable after construction, so one instance can score for many
/// concurrent episodes.
class ProxyScorer {
 public:
  ProxyScorer(GpbprModel model, ScoreNormalizer normalizer, const data::Dataset& dataset);

  /// personalized_score for registered garments; throws ContractError on unknown ids.
  double raw(std::string_view user, std::string_view top, std::string_view bottom) const;

  /// feedback in [0, 1]: the normalized raw score.
  double feedback(std::string_view user, std::string_view top, std::string_view bottom) const {
    return normalizer_.normalize(raw(user, top, bottom));
  }

  const GpbprModel& model() const { return model_; }
  const ScoreNormalizer& normalizer() const { return normalizer_; }

 private:
  const Latents& latents(const std::map<std::string, Latents, std::less<>>& table, std::string_view id,
                         const char* kind) const;

  GpbprModel model_;
  ScoreNormalizer normalizer_;
  std::map<std::string, Latents, std::less<>> tops_;
  std::map<std::string, Latents, std::less<>> bottoms_;
};

}  // namespace igrec::proxy
