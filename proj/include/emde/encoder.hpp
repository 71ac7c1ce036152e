#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "emde/cleora.hpp"
#include "emde/sketch.hpp"

namespace emde {

struct hyperplane {
    std::vector<double> direction;  // unit length
    double threshold = 0.0;
};

/// One data-dependent LSH partitioning of an embedding manifold into `width`
/// regions, cut by log2(width) hyperplanes.
struct partitioning {
    std::uint32_t width = 0;
    std::uint64_t seed = 0;
    std::vector<hyperplane> hyperplanes;
};

enum class modality_kind : std::uint32_t { lsh = 0, random = 1 };

/// Region ids of every city under `depth` partitionings (the M matrix).
class codes_matrix {
public:
    codes_matrix() = default;
    codes_matrix(std::size_t cities, sketch_shape shape, modality_kind kind, std::uint32_t source_iteration,
                 std::uint64_t seed);

    std::size_t cities() const noexcept { return cities_; }
    sketch_shape shape() const noexcept { return shape_; }
    std::uint32_t depth() const noexcept { return shape_.depth; }
    std::uint32_t width() const noexcept { return shape_.width; }
    modality_kind kind() const noexcept { return kind_; }
    // Cleora iteration count of the embedding table this was fit on (0 for random codes).
    std::uint32_t source_iteration() const noexcept { return source_iteration_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::span<std::uint16_t> row(std::size_t city) { return {ids_.data() + city * shape_.depth, shape_.depth}; }
    std::span<const std::uint16_t> row(std::size_t city) const {
        return {ids_.data() + city * shape_.depth, shape_.depth};
    }
    const std::vector<std::uint16_t>& data() const noexcept { return ids_; }

    bool operator==(const codes_matrix&) const = default;

private:
    std::size_t cities_ = 0;
    sketch_shape shape_{};
    modality_kind kind_ = modality_kind::lsh;
    std::uint32_t source_iteration_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<std::uint16_t> ids_;
};

/// Gaussian directions with thresholds at the median projection of the fitted rows.
partitioning fit_partition(const embedding_table& embeddings, std::uint32_t width, std::uint64_t seed);

/// Σ_j [dot(direction_j, v) > threshold_j] · 2^j
std::uint32_t assign_region(const partitioning& part, std::span<const double> vector);

/// `depth` partitionings seeded seed, seed+1, ...
codes_matrix build_codes(const embedding_table& embeddings, std::uint32_t width, std::uint32_t depth,
                         std::uint64_t seed);

/// Codes independent of geometry, keyed by (seed, city, depth).
codes_matrix build_random_codes(std::size_t city_count, std::uint32_t width, std::uint32_t depth, std::uint64_t seed);

/// One-hot per depth: cell n·K + row[n] is 1.
sketch item_sketch(std::span<const std::uint16_t> codes_row, sketch_shape shape);

/// Concatenated per-modality item sketch of one city.
sketch item_sketch(std::span<const codes_matrix> modalities, std::size_t city);

void save_codes(const codes_matrix& codes, const std::filesystem::path& path, std::uint64_t fingerprint = 0);
codes_matrix load_codes(const std::filesystem::path& path, std::uint64_t* fingerprint = nullptr);

}  // namespace emde
