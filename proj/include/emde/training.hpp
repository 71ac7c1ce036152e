#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "emde/dataset.hpp"
#include "emde/encoder.hpp"
#include "emde/features.hpp"
#include "emde/network.hpp"

namespace emde {

struct training_options {
    std::size_t hidden = 256;
    std::size_t blocks = 3;
    double leaky_slope = 0.01;
    double bn_momentum = 0.1;
    adamw_options optimizer{};
    std::size_t batch = 128;
    std::size_t epochs = 2;           // stage 1: every example
    std::size_t finetune_epochs = 1;  // stage 2: final-destination examples
    double finetune_lr_factor = 0.1;
    std::uint64_t seed = 0;
    input_options input{};
};

struct epoch_record {
    int stage = 1;
    std::size_t epoch = 0;
    double mean_loss = 0.0;  // average train-mode batch loss over the epoch
    std::size_t steps = 0;
};

/// A trained model together with everything needed to decode its output:
/// city vocabulary, per-modality codes, feature statistics and final-destination counts.
struct predictor {
    training_options options;
    city_index cities;
    std::vector<codes_matrix> codes;
    feature_encoder features;
    std::vector<std::uint64_t> final_counts;  // per city, over training examples
    network<float> net;
    adamw<float> optimizer;
    std::vector<epoch_record> history;
    std::uint64_t fingerprint = 0;
};

/// Network input and targets for a list of examples, in the layout the network expects.
template <class Scalar>
struct encoded_batch {
    typename network<Scalar>::batch input;
    typename network<Scalar>::index_matrix targets;  // total depth x B; empty if any target unknown
};

template <class Scalar>
encoded_batch<Scalar> encode_batch(std::span<const trip_example* const> examples, const city_index& cities,
                                   std::span<const codes_matrix> codes, const feature_encoder& features,
                                   const input_options& options, bool with_targets);

network_shape make_network_shape(std::span<const codes_matrix> codes, const feature_encoder& features,
                                 const training_options& options);

/// Builds and fits a fresh predictor: stage 1 over all examples, then stage 2
/// fine-tunes on final-destination examples at finetune_lr_factor × lr.
predictor train_two_stage(std::span<const trip_example> train, const city_index& cities,
                          std::vector<codes_matrix> codes, const training_options& options);

/// Mean eval-mode loss over the examples.
double evaluate_loss(const predictor& model, std::span<const trip_example> examples);

/// Decoded per-city scores (cities x examples), geometric mean over the row-softmax output sketch.
Eigen::MatrixXd decode_scores(const predictor& model, std::span<const trip_example> examples);

void save_predictor(const predictor& model, const std::filesystem::path& path);
predictor load_predictor(const std::filesystem::path& path);

}  // namespace emde
