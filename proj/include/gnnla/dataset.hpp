#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gnnla/fem.hpp"

namespace gnnla::dataset {

/// One directory per instance:
///   matrix.mtx   Matrix Market, 17 significant digits
///   meta.json    kind, seed, index, n, h, grid shape, band or theta parameters
///   coords.csv   x,y per unknown
///   targets.csv  alpha,beta per unknown (header only for jacobi instances)
void save_instance(const fem::ProblemInstance& p, const std::filesystem::path& dir);
fem::ProblemInstance load_instance(const std::filesystem::path& dir);

/// Content hash of an instance directory (FNV-1a over the four files in a fixed order).
std::string instance_hash(const std::filesystem::path& dir);

/// Writes <root>/{train,val,test}/NNNNN plus <root>/manifest.json listing every split with
/// per-instance hashes and the generating config. An existing root is an error unless force
/// is set, in which case it is removed first.
void save_dataset(const fem::Dataset& d, const std::filesystem::path& root, const nlohmann::json& config,
                  bool force);

/// Reads a dataset written by save_dataset and checks the manifest hashes.
fem::Dataset load_dataset(const std::filesystem::path& root);

/// The "config" object stored in a manifest.
nlohmann::json load_manifest(const std::filesystem::path& root);

} // namespace gnnla::dataset
