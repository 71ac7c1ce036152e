#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "emde/dataset.hpp"
#include "emde/training.hpp"

namespace emde {

inline constexpr double kPopularityFloor = 0.1;

/// How often each city closes a trip in the training data.
struct popularity_table {
    std::vector<std::uint64_t> final_counts;

    /// max(ln(1 + count), kPopularityFloor)
    double weight(std::size_t city) const;
};

std::vector<double> popularity_boost(std::span<const double> scores, const popularity_table& table);

/// Per-city arithmetic mean over models.
std::vector<double> ensemble(std::span<const std::vector<double>> score_vectors);

/// Indices of the k best scores, best first; ties go to the lower index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

struct eval_sample {
    std::vector<std::size_t> ranked;  // predicted cities, best first
    std::size_t target = 0;
    std::size_t trip_length = 0;
    bool is_return = false;  // target equals the first city of the trip
};

struct bucket_precision {
    std::size_t samples = 0;
    std::size_t hits = 0;
    double precision() const { return samples ? static_cast<double>(hits) / static_cast<double>(samples) : 0.0; }
};

struct eval_report {
    std::size_t k = 4;
    double precision_at_k = 0.0;
    std::vector<std::uint8_t> hits;
    std::map<std::size_t, bucket_precision> by_trip_length;
    bucket_precision return_trips;

    nlohmann::json to_json() const;
};

/// A sample scores 1 when its target is among the first k ranked cities.
eval_report precision_at_k(std::span<const eval_sample> samples, std::size_t k = 4);

struct decode_options {
    bool popularity_boost = true;
    std::size_t top_k = 4;
};

/// Ranked predictions from an ensemble of predictors sharing one city vocabulary.
std::vector<eval_sample> rank_examples(std::span<const predictor* const> models, std::span<const trip_example> examples,
                                       const decode_options& options);

eval_report evaluate_models(std::span<const predictor* const> models, std::span<const trip_example> examples,
                            const decode_options& options);

/// Ranks every city by popularity weight alone.
eval_report evaluate_popularity_baseline(const popularity_table& table, const city_index& cities,
                                         std::span<const trip_example> examples, std::size_t k = 4);

void write_hits_csv(const std::filesystem::path& path, std::span<const trip_example> examples,
                    const eval_report& report);

/// Data shared by every ablation configuration.
struct prepared_data {
    std::vector<trip_example> train;
    std::vector<trip_example> valid;
    city_index cities;
    std::vector<codes_matrix> codes;
};

struct ablation_options {
    training_options base{};
    std::size_t ensemble_size = 5;
};

struct ablation_column {
    std::string name;
    double precision = 0.0;
    double return_precision = 0.0;
};

struct ablation_table {
    std::vector<ablation_column> columns;  // Basic, +Data, +Features, +Popularity, +Ensembling
    double popularity_baseline = 0.0;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

/// Trains and evaluates the cumulative configurations:
///   Basic       final-destination examples only, sketch inputs only, plain decoding
///   +Data       all prefix examples plus the is-final flag
///   +Features   numerical and categorical features
///   +Popularity popularity-boosted decoding
///   +Ensembling mean of ensemble_size models differing by training seed
ablation_table ablation_run(const prepared_data& data, const ablation_options& options);

}  // namespace emde
