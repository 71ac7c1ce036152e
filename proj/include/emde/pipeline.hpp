#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emde/cleora.hpp"
#include "emde/config.hpp"
#include "emde/evaluator.hpp"
#include "emde/graph.hpp"

namespace emde {

/// Chained per-stage fingerprints: each covers its own settings plus everything upstream.
struct stage_fingerprints {
    std::uint64_t data = 0;
    std::uint64_t graph = 0;
    std::uint64_t embed = 0;
    std::uint64_t sketches = 0;
    std::vector<std::uint64_t> models;
    std::uint64_t evaluate = 0;
};

stage_fingerprints compute_fingerprints(const pipeline_config& config);

/// Fingerprint stored in a binary artifact header, or nullopt if the header is unreadable.
std::optional<std::uint64_t> peek_fingerprint(const std::filesystem::path& path);

/// LSH codes for each embedding table, plus the random modality when enabled.
std::vector<codes_matrix> build_modalities(const pipeline_config& config, std::span<const embedding_table> tables);

training_options model_options(const pipeline_config& config, std::size_t member);

/// All pipeline inputs computed in memory (no artifacts written).
prepared_data prepare_data(const pipeline_config& config);

struct pipeline_result {
    eval_report report;
    double popularity_baseline = 0.0;
    std::vector<std::string> ran;
    std::vector<std::string> skipped;
};

/// generate/ingest -> split -> build-graph -> embed -> fit-sketches -> train -> evaluate,
/// persisting each artifact under config.work_dir. A stage is skipped when its stamp
/// and the fingerprints embedded in its artifacts match the current config. On failure
/// a `<stage>.failed` marker is left next to the partial artifacts and the error rethrown.
pipeline_result run_pipeline(const pipeline_config& config);

struct ablation_study {
    std::vector<std::uint64_t> seeds;
    std::vector<ablation_table> tables;

    std::vector<std::string> column_names() const;
    std::vector<double> column_mean() const;
    std::vector<double> column_stddev() const;
    nlohmann::json to_json() const;
};

ablation_study run_ablation_study(const pipeline_config& config, std::span<const std::uint64_t> seeds);

/// Artifact locations inside a work directory.
struct artifact_paths {
    std::filesystem::path root;
    std::filesystem::path trips() const { return root / "trips.csv"; }
    std::filesystem::path train_examples() const { return root / "train.csv"; }
    std::filesystem::path valid_examples() const { return root / "valid.csv"; }
    std::filesystem::path graph() const { return root / "graph.bin"; }
    std::filesystem::path embedding(unsigned iteration) const {
        return root / ("embedding.i" + std::to_string(iteration) + ".bin");
    }
    std::filesystem::path codes(std::size_t modality) const {
        return root / ("codes." + std::to_string(modality) + ".bin");
    }
    std::filesystem::path model(std::size_t member) const { return root / ("model." + std::to_string(member) + ".bin"); }
    std::filesystem::path report_dir() const { return root / "report"; }
    std::filesystem::path stamp(const std::string& stage) const { return root / "stamps" / stage; }
    std::filesystem::path failed_marker(const std::string& stage) const { return root / (stage + ".failed"); }
};

}  // namespace emde
