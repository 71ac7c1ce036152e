#pragma once

#include <span>
#include <vector>

#include "emde/encoder.hpp"
#include "emde/sketch.hpp"

namespace emde {

inline constexpr double kScoreFloor = 1e-9;

/// Geometric mean, jointly over all modalities and depths, of the output values at
/// each city's region cells. Values below kScoreFloor (including negatives) are
/// clamped to it first.
std::vector<double> score_items(const sketch& output, std::span<const codes_matrix> modalities);

/// Same, over a raw flat output laid out as the concatenation of `modalities`.
std::vector<double> score_items(std::span<const double> output, std::span<const codes_matrix> modalities);

/// Logs of the clamped output cells; shared by score_items and batched decoding.
void score_items_from_logs(std::span<const double> log_output, std::span<const codes_matrix> modalities,
                           std::span<double> scores);

}  // namespace emde
