#include "emde/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "emde/common.hpp"

namespace emde {

namespace {

std::size_t checked_layout(std::span<const codes_matrix> modalities, std::size_t output_size) {
    if (modalities.empty()) throw error("score_items: no modalities");
    std::size_t total = 0;
    for (const auto& m : modalities) {
        if (m.cities() != modalities.front().cities()) throw error("score_items: modality city counts differ");
        total += m.shape().size();
    }
    if (total != output_size) throw error("score_items: output length does not match codes layout");
    return total;
}

}  // namespace

void score_items_from_logs(std::span<const double> log_output, std::span<const codes_matrix> modalities,
                           std::span<double> scores) {
    checked_layout(modalities, log_output.size());
    const std::size_t cities = modalities.front().cities();
    if (scores.size() != cities) throw error("score_items: score buffer has wrong length");
    std::size_t total_depth = 0;
    for (const auto& m : modalities) total_depth += m.depth();
    const double inv_depth = 1.0 / static_cast<double>(total_depth);

    std::fill(scores.begin(), scores.end(), 0.0);
    std::size_t offset = 0;
    for (const auto& m : modalities) {
        const std::uint32_t width = m.width();
        for (std::size_t c = 0; c < cities; ++c) {
            const auto row = m.row(c);
            double acc = 0.0;
            for (std::uint32_t n = 0; n < m.depth(); ++n) acc += log_output[offset + std::size_t{n} * width + row[n]];
            scores[c] += acc;
        }
        offset += m.shape().size();
    }
    for (double& s : scores) s = std::exp(s * inv_depth);
}

std::vector<double> score_items(std::span<const double> output, std::span<const codes_matrix> modalities) {
    checked_layout(modalities, output.size());
    std::vector<double> logs(output.size());
    std::transform(output.begin(), output.end(), logs.begin(),
                   [](double v) { return std::log(std::max(v, kScoreFloor)); });
    std::vector<double> scores(modalities.front().cities());
    score_items_from_logs(logs, modalities, scores);
    return scores;
}

std::vector<double> score_items(const sketch& output, std::span<const codes_matrix> modalities) {
    if (output.shapes().size() != modalities.size()) throw error("score_items: modality count mismatch");
    for (std::size_t i = 0; i < modalities.size(); ++i)
        if (output.shapes()[i] != modalities[i].shape()) throw error("score_items: modality shape mismatch");
    return score_items(output.cells(), modalities);
}

}  // namespace emde
