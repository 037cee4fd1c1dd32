#include "igrec/data/dataset.hpp"

#include <algorithm>
#include <set>

#include "igrec/common/error.hpp"

namespace igrec::data {

std::string_view to_string(Category category) {
  return category == Category::kTop ? "top" : "bottom";
}

Category category_from_string(std::string_view name) {
  if (name == "top") return Category::kTop;
  if (name == "bottom") return Category::kBottom;
  throw LoadError("unknown garment category '" + std::string(name) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw LoadError("unknown split '" + std::string(name) + "'");
}

const Garment* Dataset::find(std::string_view id) const {
  const auto it = garments.find(id);
  return it == garments.end() ? nullptr : &it->second;
}

const Garment& Dataset::garment(std::string_view id) const {
  if (const auto* g = find(id)) return *g;
  throw ContractError("unknown garment id '" + std::string(id) + "'");
}

std::vector<std::string> Dataset::ids(Category category) const {
  std::vector<std::string> out;
  for (const auto& [id, g] : garments) {
    if (g.category == category) out.push_back(id);
  }
  return out;
}

std::vector<OutfitQuadruple> Dataset::quadruples_in(Split split) const {
  std::vector<OutfitQuadruple> out;
  std::copy_if(quadruples.begin(), quadruples.end(), std::back_inserter(out),
               [split](const OutfitQuadruple& q) { return q.split == split; });
  return out;
}

Eigen::MatrixXd Dataset::feature_matrix(const std::vector<std::string>& ids) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(feature_dim), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = garment(ids[i]).feature;
  return m;
}

void Dataset::validate() const {
  if (feature_dim == 0) throw LoadError("feature_dim must be positive");
  for (const auto& [id, g] : garments) {
    if (id != g.id) throw LoadError("garment keyed as '" + id + "' carries id '" + g.id + "'");
    if (static_cast<std::size_t>(g.feature.size()) != feature_dim) {
      throw LoadError("garment '" + id + "' has feature dim " + std::to_string(g.feature.size()) +
                      ", dataset declares " + std::to_string(feature_dim));
    }
    if (!g.feature.allFinite()) throw LoadError("garment '" + id + "' has non-finite features");
    if (context_dim) {
      if (!g.context || static_cast<std::size_t>(g.context->size()) != *context_dim) {
        throw LoadError("garment '" + id + "' context feature does not match context_dim " +
                        std::to_string(*context_dim));
      }
    } else if (g.context) {
      throw LoadError("garment '" + id + "' has a context feature but the dataset declares none");
    }
  }
  if (!std::is_sorted(users.begin(), users.end()) ||
      std::adjacent_find(users.begin(), users.end()) != users.end()) {
    throw LoadError("user list must be sorted and unique");
  }
  auto expect = [&](const std::string& id, Category category, std::size_t index, const char* role) {
    const auto* g = find(id);
    if (!g) {
      throw LoadError("quadruple " + std::to_string(index) + " references unknown " + role + " id '" + id + "'");
    }
    if (g->category != category) {
      throw LoadError("quadruple " + std::to_string(index) + ": '" + id + "' is not a " +
                      std::string(to_string(category)));
    }
  };
  for (std::size_t i = 0; i < quadruples.size(); ++i) {
    const auto& q = quadruples[i];
    if (!std::binary_search(users.begin(), users.end(), q.user)) {
      throw LoadError("quadruple " + std::to_string(i) + " references unknown user id '" + q.user + "'");
    }
    expect(q.top, Category::kTop, i, "top");
    expect(q.positive, Category::kBottom, i, "bottom");
    expect(q.negative, Category::kBottom, i, "bottom");
    if (q.positive == q.negative) {
      throw LoadError("quadruple " + std::to_string(i) + " uses '" + q.positive + "' as both positive and negative");
    }
  }
  std::map<UserTopKey, Split> owner;
  for (const auto& q : quadruples) {
    const auto [it, inserted] = owner.emplace(UserTopKey{q.user, q.top}, q.split);
    if (!inserted && it->second != q.split) {
      throw LoadError("(user '" + q.user + "', top '" + q.top + "') appears in both " +
                      std::string(to_string(it->second)) + " and " + std::string(to_string(q.split)) + " splits");
    }
  }
}

}  // namespace igrec::data
