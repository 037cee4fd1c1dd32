#include "igrec/data/manifest.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"

namespace igrec::data {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string blob_name(const char* stem, Category category) {
  return std::string(stem) + "_" + std::string(to_string(category)) + ".f32";
}

}  // namespace

void save_manifest(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  fs::create_directories(dir);
  json garments = json::array();
  for (Category category : {Category::kTop, Category::kBottom}) {
    const auto ids = dataset.ids(category);
    Eigen::MatrixXd features(static_cast<Eigen::Index>(dataset.feature_dim), static_cast<Eigen::Index>(ids.size()));
    Eigen::MatrixXd context(static_cast<Eigen::Index>(dataset.context_dim.value_or(0)),
                            static_cast<Eigen::Index>(ids.size()));
    for (std::size_t row = 0; row < ids.size(); ++row) {
      const auto& g = dataset.garment(ids[row]);
      features.col(static_cast<Eigen::Index>(row)) = g.feature;
      if (dataset.context_dim) context.col(static_cast<Eigen::Index>(row)) = *g.context;
      json entry = {{"id", g.id}, {"category", to_string(category)}, {"row", row}};
      if (!g.image_url.empty()) entry["image_url"] = g.image_url;
      garments.push_back(std::move(entry));
    }
    io::save_f32_matrix(dir / blob_name("features", category), features);
    if (dataset.context_dim) io::save_f32_matrix(dir / blob_name("context", category), context);
  }
  json quadruples = json::array();
  for (const auto& q : dataset.quadruples) {
    quadruples.push_back(
        {{"user", q.user}, {"top", q.top}, {"pos", q.positive}, {"neg", q.negative}, {"split", to_string(q.split)}});
  }
  const json manifest = {{"feature_dim", dataset.feature_dim},
                         {"context_dim", dataset.context_dim ? json(*dataset.context_dim) : json(nullptr)},
                         {"users", dataset.users},
                         {"garments", std::move(garments)},
                         {"quadruples", std::move(quadruples)}};
  io::write_text_file(dir / kManifestFile, manifest.dump(1));
}

Dataset load_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestFile : path;
  const fs::path dir = file.parent_path();
  json manifest;
  try {
    manifest = json::parse(io::read_text_file(file));
  } catch (const json::exception& e) {
    throw LoadError(file.string() + ": malformed JSON: " + e.what());
  }

  Dataset dataset;
  try {
    dataset.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    if (!manifest.at("context_dim").is_null()) dataset.context_dim = manifest.at("context_dim").get<std::size_t>();

    std::map<Category, std::vector<std::pair<std::size_t, std::string>>> rows;
    for (const auto& entry : manifest.at("garments")) {
      Garment g;
      g.id = entry.at("id").get<std::string>();
      g.category = category_from_string(entry.at("category").get<std::string>());
      g.image_url = entry.value("image_url", "");
      rows[g.category].emplace_back(entry.at("row").get<std::size_t>(), g.id);
      if (!dataset.garments.emplace(g.id, std::move(g)).second) {
        throw LoadError("duplicate garment id '" + entry.at("id").get<std::string>() + "'");
      }
    }
    for (Category category : {Category::kTop, Category::kBottom}) {
      auto& list = rows[category];
      std::sort(list.begin(), list.end());
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i].first != i) {
          throw LoadError(std::string(to_string(category)) + " rows must be 0..n-1 without gaps; found row " +
                          std::to_string(list[i].first) + " for '" + list[i].second + "'");
        }
      }
      if (list.empty()) continue;
      const auto features = io::load_f32_matrix(dir / blob_name("features", category), list.size(), dataset.feature_dim);
      std::optional<Eigen::MatrixXd> context;
      if (dataset.context_dim) {
        context = io::load_f32_matrix(dir / blob_name("context", category), list.size(), *dataset.context_dim);
      }
      for (const auto& [row, id] : list) {
        auto& g = dataset.garments.at(id);
        g.feature = features.col(static_cast<Eigen::Index>(row));
        if (context) g.context = Eigen::VectorXd(context->col(static_cast<Eigen::Index>(row)));
      }
    }

    std::set<std::string> users;
    if (manifest.contains("users")) {
      for (const auto& u : manifest.at("users")) users.insert(u.get<std::string>());
    }
    for (const auto& entry : manifest.at("quadruples")) {
      OutfitQuadruple q;
      q.user = entry.at("user").get<std::string>();
      q.top = entry.at("top").get<std::string>();
      q.positive = entry.at("pos").get<std::string>();
      q.negative = entry.at("neg").get<std::string>();
      q.split = split_from_string(entry.value("split", "train"));
      if (!manifest.contains("users")) users.insert(q.user);
      dataset.quadruples.push_back(std::move(q));
    }
    dataset.users.assign(users.begin(), users.end());
  } catch (const json::exception& e) {
    throw LoadError(file.string() + ": " + e.what());
  } catch (const LoadError& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
  try {
    dataset.validate();
  } catch (const LoadError& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
  return dataset;
}

}  // namespace igrec::data
