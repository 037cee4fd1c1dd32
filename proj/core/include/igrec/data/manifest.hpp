#pragma once

#include <filesystem>

#include "igrec/data/dataset.hpp"

namespace igrec::data {

// On-disk layout of a dataset directory:
//   dataset.json        {feature_dim, context_dim|null, users:[..],
//                        garments:[{id, category, row, image_url?}],
//                        quadruples:[{user, top, pos, neg, split}]}
//   features_top.f32    little-endian f32, row-major, one row per top (row order per manifest)
//   features_bottom.f32 same for bottoms
//   context_top.f32 / context_bottom.f32 only when context_dim is not null
//
// `users` is optional on read; when absent it is derived from the quadruples.

inline constexpr const char* kManifestFile = "dataset.json";

/// Writes the manifest and blobs into `dir` (created if needed). Rows follow sorted id order.
void save_manifest(const Dataset& dataset, const std::filesystem::path& dir);

/// `path` is either the dataset.json file or its directory. Returns a validated Dataset;
/// throws LoadError naming the offending file, id or dimension.
Dataset load_manifest(const std::filesystem::path& path);

}  // namespace igrec::data
