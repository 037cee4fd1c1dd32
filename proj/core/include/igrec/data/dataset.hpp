#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace igrec::data {

enum class Category { kTop, kBottom };

std::string_view to_string(Category category);
Category category_from_string(std::string_view name);

struct Garment {
  std::string id;
  Category category = Category::kTop;
  Eigen::VectorXd feature;
  std::optional<Eigen::VectorXd> context;  // textual metadata embedding
  std::string image_url;                   // optional display asset; empty when absent
};

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

/// (user m, top i, preferred bottom j, dispreferred bottom k)
struct OutfitQuadruple {
  std::string user;
  std::string top;
  std::string positive;
  std::string negative;
  Split split = Split::kTrain;

  bool operator==(const OutfitQuadruple&) const = default;
};

/// Immutable once validated; safe to share across threads.
struct Dataset {
  std::size_t feature_dim = 0;
  std::optional<std::size_t> context_dim;
  std::map<std::string, Garment, std::less<>> garments;
  std::vector<std::string> users;  // sorted, unique
  std::vector<OutfitQuadruple> quadruples;

  const Garment& garment(std::string_view id) const;
  const Garment* find(std::string_view id) const;

  /// Sorted ids of one category.
  std::vector<std::string> ids(Category category) const;

  std::vector<OutfitQuadruple> quadruples_in(Split split) const;

  /// Feature matrix (feature_dim x n) of the given garments, in order.
  Eigen::MatrixXd feature_matrix(const std::vector<std::string>& ids) const;

  /// Throws LoadError describing the first violated invariant: uniform feature and
  /// context dims, finite features, categories, resolvable ids, positive != negative.
  void validate() const;
};

/// Key used for split disjointness.
using UserTopKey = std::pair<std::string, std::string>;

}  // namespace igrec::data
