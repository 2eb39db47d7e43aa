#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "gnnla/fem.hpp"
#include "gnnla/train.hpp"

namespace gnnla {

enum class ProblemKind { jacobi, diffusion };

std::string to_string(ProblemKind k);
ProblemKind problem_kind_from_string(const std::string& s);

struct EvalSettings {
    train::EigOptions eig;
    std::size_t bins = 20;
    /// diffusion frequency sweep
    int theta_grid_max = 10;
    Index sweep_n = 32;
    Index probe_n = 32;
};

/// Versioned run description shared by gen-data, train and eval:
///   {version, seed, output_dir, dataset{kind, dir, ...}, model{kind, ...}, train{...}, eval{...}}
/// Every section is optional except version; unknown keys are rejected.
struct RunConfig {
    static constexpr int current_version = 1;

    ProblemKind kind = ProblemKind::jacobi;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    std::filesystem::path data_dir = "data";
    fem::JacobiDataConfig jacobi_data;
    fem::DiffusionDataConfig diffusion_data;
    train::TrainConfig train;
    EvalSettings eval;

    /// Canonical JSON of the dataset section (stored in the manifest).
    nlohmann::json dataset_json() const;
    nlohmann::json to_json() const;
};

/// Throws Error naming the offending key on unknown keys, wrong types or a bad version.
/// Relative directories stay relative to the working directory.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace gnnla
