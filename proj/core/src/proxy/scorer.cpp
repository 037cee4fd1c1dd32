#include "igrec/proxy/scorer.hpp"

#include "igrec/common/error.hpp"

namespace igrec::proxy {

ProxyScorer::ProxyScorer(GpbprModel model, ScoreNormalizer normalizer, const data::Dataset& dataset)
    : model_(std::move(model)), normalizer_(normalizer) {
  model_.validate();
  if (!(normalizer_.lo < normalizer_.hi)) throw ContractError("normalizer requires lo < hi");
  for (const auto& [id, garment] : dataset.garments) {
    if (garment.category == data::Category::kTop) {
      tops_.emplace(id, model_.project_top(garment));
    } else {
      bottoms_.emplace(id, model_.project_bottom(garment));
    }
  }
}

const Latents& ProxyScorer::latents(const std::map<std::string, Latents, std::less<>>& table, std::string_view id,
                                    const char* kind) const {
  const auto it = table.find(id);
  if (it == table.end()) throw ContractError(std::string("unknown ") + kind + " '" + std::string(id) + "'");
  return it->second;
}

double ProxyScorer::raw(std::string_view user, std::string_view top, std::string_view bottom) const {
  const double s = model_.general_compatibility(latents(tops_, top, "top"), latents(bottoms_, bottom, "bottom"));
  return model_.mu * s + (1.0 - model_.mu) * model_.personal_preference(user, bottom);
}

}  // namespace igrec::proxy
