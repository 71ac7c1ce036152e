#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "emde/dataset.hpp"
#include "emde/training.hpp"

namespace emde {

enum class profile { desk, paper };

/// Every knob of the end-to-end pipeline. Defaults are the desk-scale profile.
struct pipeline_config {
    profile scale = profile::desk;

    std::filesystem::path work_dir = "emde_work";
    std::filesystem::path trips;  // challenge CSV; empty means generate synthetic data
    synthetic_config synthetic{};

    double valid_fraction = 0.2;

    std::size_t dim = 64;
    std::vector<unsigned> iterations{1, 3};
    bool directed_only = false;

    std::uint32_t width = 16;
    std::uint32_t depth = 8;
    bool random_modality = true;

    training_options training{};
    std::size_t ensemble = 5;
    bool popularity_boost = true;
    std::size_t top_k = 4;
    bool strict_deterministic = true;

    std::uint64_t seed = 0;
};

pipeline_config default_config(profile p);

/// Known keys, in a stable order (also the order flags are registered in).
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value; unknown keys and bad values throw.
void apply_setting(pipeline_config& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines ('#' comments, optional quotes, [section] headers ignored).
/// A `profile` key, if present, resets defaults before the rest is applied.
pipeline_config load_config_file(const std::filesystem::path& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);
void apply_settings(pipeline_config& config, const std::map<std::string, std::string>& settings);

/// Canonical `key = value` rendering, used for fingerprints and reports.
std::string describe(const pipeline_config& config);

/// Stage seeds derived from the master seed.
std::uint64_t stage_seed(const pipeline_config& config, std::string_view stage);

}  // namespace emde
