#include "igrec/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"
#include "igrec/common/rng.hpp"

namespace igrec::data {
namespace {

std::string make_id(char prefix, std::size_t index, std::size_t count) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::max<std::size_t>(3, std::to_string(count - 1).size());
  return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

Eigen::VectorXd gaussian(std::size_t n, Rng& rng, double stddev = 1.0) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal(0.0, stddev);
  return v;
}

Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

SyntheticWorld::SyntheticWorld(SyntheticConfig config, std::map<std::string, Eigen::VectorXd> tastes,
                               std::map<std::string, Eigen::VectorXd> styles)
    : config_(std::move(config)), tastes_(std::move(tastes)), styles_(std::move(styles)) {}

const Eigen::VectorXd& SyntheticWorld::taste(const std::string& user) const {
  const auto it = tastes_.find(user);
  if (it == tastes_.end()) throw ContractError("synthetic world has no user '" + user + "'");
  return it->second;
}

const Eigen::VectorXd& SyntheticWorld::style(const std::string& garment) const {
  const auto it = styles_.find(garment);
  if (it == styles_.end()) throw ContractError("synthetic world has no garment '" + garment + "'");
  return it->second;
}

double SyntheticWorld::taste_affinity(const std::string& user, const std::string& bottom) const {
  return taste(user).dot(style(bottom));
}

double SyntheticWorld::match(const std::string& top, const std::string& bottom) const {
  return style(top).dot(style(bottom));
}

double SyntheticWorld::truth(const std::string& user, const std::string& top, const std::string& bottom) const {
  return config_.taste_weight * taste_affinity(user, bottom) + config_.match_weight * match(top, bottom);
}

SyntheticData generate_synthetic(const SyntheticConfig& config, std::size_t n_users, std::size_t n_tops,
                                 std::size_t n_bottoms, std::size_t n_quadruples) {
  if (n_users == 0 || n_tops == 0 || n_quadruples == 0) {
    throw ContractError("synthetic counts must all be at least 1");
  }
  if (n_bottoms < 2) throw ContractError("need at least 2 bottoms to form positive/negative pairs");
  if (config.feature_dim == 0 || config.style_dim == 0) throw ContractError("feature and style dims must be positive");
  if (config.noise < 0.0) throw ContractError("noise must be non-negative");

  Rng rng(config.seed);
  const double projection_scale = 1.0 / std::sqrt(static_cast<double>(config.style_dim));
  const Eigen::MatrixXd top_projection = gaussian(config.feature_dim, config.style_dim, rng, projection_scale);
  const Eigen::MatrixXd bottom_projection = gaussian(config.feature_dim, config.style_dim, rng, projection_scale);
  Eigen::MatrixXd context_projection;
  if (config.context_dim) {
    context_projection = gaussian(*config.context_dim, config.style_dim, rng, projection_scale);
  }

  SyntheticData out;
  Dataset& dataset = out.dataset;
  dataset.feature_dim = config.feature_dim;
  dataset.context_dim = config.context_dim;

  std::map<std::string, Eigen::VectorXd> tastes;
  std::map<std::string, Eigen::VectorXd> styles;
  for (std::size_t u = 0; u < n_users; ++u) {
    const auto id = make_id('u', u, n_users);
    tastes.emplace(id, gaussian(config.style_dim, rng));
    dataset.users.push_back(id);
  }

  auto make_garment = [&](char prefix, std::size_t index, std::size_t count, Category category,
                          const Eigen::MatrixXd& projection) {
    Garment g;
    g.id = make_id(prefix, index, count);
    g.category = category;
    const Eigen::VectorXd style = gaussian(config.style_dim, rng, projection_scale);
    g.feature = io::quantize_f32(projection * style + gaussian(config.feature_dim, rng, config.feature_noise));
    if (config.context_dim) {
      g.context = Eigen::VectorXd(
          io::quantize_f32(context_projection * style + gaussian(*config.context_dim, rng, config.feature_noise)));
    }
    styles.emplace(g.id, style);
    dataset.garments.emplace(g.id, std::move(g));
  };
  std::vector<std::string> tops, bottoms;
  for (std::size_t t = 0; t < n_tops; ++t) {
    make_garment('t', t, n_tops, Category::kTop, top_projection);
    tops.push_back(make_id('t', t, n_tops));
  }
  for (std::size_t b = 0; b < n_bottoms; ++b) {
    make_garment('b', b, n_bottoms, Category::kBottom, bottom_projection);
    bottoms.push_back(make_id('b', b, n_bottoms));
  }
  out.world = SyntheticWorld(config, std::move(tastes), std::move(styles));

  // (user, top) pairs: distinct when there are enough of them.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t total_pairs = n_users * n_tops;
  if (n_quadruples <= total_pairs) {
    std::vector<std::size_t> order(total_pairs);
    for (std::size_t i = 0; i < total_pairs; ++i) order[i] = i;
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < n_quadruples; ++i) pairs.emplace_back(order[i] / n_tops, order[i] % n_tops);
    std::sort(pairs.begin(), pairs.end());
  } else {
    for (std::size_t i = 0; i < n_quadruples; ++i) pairs.emplace_back(rng.index(n_users), rng.index(n_tops));
  }

  const std::size_t pool_size = std::clamp<std::size_t>(config.candidate_pool, 2, n_bottoms);
  std::vector<std::size_t> bottom_order(n_bottoms);
  for (const auto& [u, t] : pairs) {
    const auto& user = dataset.users[u];
    const auto& top = tops[t];
    for (;;) {
      for (std::size_t i = 0; i < n_bottoms; ++i) bottom_order[i] = i;
      // Partial Fisher-Yates: the first pool_size entries form a uniform sample.
      for (std::size_t i = 0; i < pool_size; ++i) std::swap(bottom_order[i], bottom_order[i + rng.index(n_bottoms - i)]);
      std::vector<double> noisy(pool_size);
      std::size_t best = 0;
      for (std::size_t i = 0; i < pool_size; ++i) {
        noisy[i] = out.world.truth(user, top, bottoms[bottom_order[i]]) + config.noise * rng.normal();
        if (noisy[i] > noisy[best]) best = i;
      }
      std::size_t other = rng.index(pool_size - 1);
      if (other >= best) ++other;
      if (noisy[other] == noisy[best]) continue;  // exact tie: redraw the pool
      dataset.quadruples.push_back({user, top, bottoms[bottom_order[best]], bottoms[bottom_order[other]], Split::kTrain});
      break;
    }
  }
  dataset.validate();
  return out;
}

Dataset split(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ContractError("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split ratios must sum to 1");

  std::map<UserTopKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.quadruples.size(); ++i) {
    const auto& q = dataset.quadruples[i];
    groups[{q.user, q.top}].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [key, members] : groups) order.push_back(&members);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  const double n = static_cast<double>(dataset.quadruples.size());
  const std::array<std::size_t, 2> bounds{static_cast<std::size_t>(std::llround(ratios[0] * n)),
                                          static_cast<std::size_t>(std::llround((ratios[0] + ratios[1]) * n))};
  Dataset out = dataset;
  std::array<std::size_t, 3> counts{0, 0, 0};
  std::size_t assigned = 0;
  for (const auto* members : order) {
    const Split target = assigned < bounds[0] ? Split::kTrain : assigned < bounds[1] ? Split::kVal : Split::kTest;
    for (std::size_t index : *members) out.quadruples[index].split = target;
    counts[static_cast<std::size_t>(target)] += members->size();
    assigned += members->size();
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (ratios[s] > 0.0 && counts[s] == 0) {
      throw ContractError("split '" + std::string(to_string(static_cast<Split>(s))) +
                          "' is empty at the given ratios (" + std::to_string(dataset.quadruples.size()) +
                          " quadruples)");
    }
  }
  return out;
}

}  // namespace igrec::data
