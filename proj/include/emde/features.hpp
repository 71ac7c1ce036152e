#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "emde/dataset.hpp"
#include "emde/encoder.hpp"
#include "emde/sketch.hpp"

namespace emde {

/// Dense id -> row lookup over the cities that have codes.
class city_index {
public:
    city_index() = default;
    explicit city_index(std::vector<city_id> ids);

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<city_id>& ids() const noexcept { return ids_; }
    const city_id& id(std::size_t i) const { return ids_.at(i); }
    bool contains(const city_id& id) const { return index_.contains(id); }
    std::size_t at(const city_id& id) const;

private:
    std::vector<city_id> ids_;
    std::unordered_map<city_id, std::size_t> index_;
};

/// Train-set statistics for numerical standardization and categorical vocabularies.
/// Category index 0 is reserved for values never seen in training.
class feature_encoder {
public:
    static feature_encoder fit(std::span<const trip_example> train);

    std::array<double, kNumericalFeatures> standardize(const std::array<double, kNumericalFeatures>& raw) const;
    std::array<std::int32_t, kCategoricalFeatures> encode(const std::array<std::string, kCategoricalFeatures>& raw) const;
    std::size_t vocab_size(std::size_t feature) const { return vocab_.at(feature).size() + 1; }

    nlohmann::json to_json() const;
    static feature_encoder from_json(const nlohmann::json& j);

    bool operator==(const feature_encoder&) const = default;

private:
    std::array<double, kNumericalFeatures> mean_{};
    std::array<double, kNumericalFeatures> stddev_{};
    std::array<std::vector<std::string>, kCategoricalFeatures> vocab_;
    std::array<std::unordered_map<std::string, std::int32_t>, kCategoricalFeatures> lookup_;

    void rebuild_lookup();
};

struct input_options {
    bool use_flag = true;      // is-final indicator as an input
    bool use_features = true;  // numerical + categorical features
    double decay = 0.9;        // recency decay of the all-cities sketch
    std::size_t wide_embedding = 120;   // previous hotel country, affiliate
    std::size_t narrow_embedding = 20;  // remaining categorical features
};

/// Assembled network input for one example.
struct model_input {
    sketch first_city;
    sketch prev_city;
    sketch all_cities;
    std::array<double, kNumericalFeatures> numerical{};
    std::array<std::int32_t, kCategoricalFeatures> categorical{};
    double is_final = 0.0;
};

model_input assemble_input(const trip_example& example, const city_index& cities,
                           std::span<const codes_matrix> codes, const feature_encoder& features, double decay);

/// Height of the dense block fed to the network: three sketches, then optional
/// numerical features, then the optional flag.
std::size_t dense_input_width(std::span<const codes_matrix> codes, const input_options& options);

/// Writes the dense part of `input` into `out` (length dense_input_width).
void write_dense_input(const model_input& input, const input_options& options, std::span<float> out);
void write_dense_input(const model_input& input, const input_options& options, std::span<double> out);

std::vector<std::size_t> embedding_dims(const input_options& options);

}  // namespace emde
