#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace emde {

/// Depth (independent partitionings) and width (regions per partitioning) of one modality.
struct sketch_shape {
    std::uint32_t depth = 0;
    std::uint32_t width = 0;
    std::size_t size() const noexcept { return std::size_t{depth} * width; }
    bool operator==(const sketch_shape&) const = default;
};

/// Nonnegative histogram over partition regions. Cells are flat and depth-major,
/// modality after modality; `shapes` records how the flat vector is segmented.
class sketch {
public:
    sketch() = default;
    explicit sketch(sketch_shape shape) : shapes_{shape}, cells_(shape.size(), 0.0) {}
    explicit sketch(std::vector<sketch_shape> shapes);
    sketch(std::vector<sketch_shape> shapes, std::vector<double> cells);

    const std::vector<sketch_shape>& shapes() const noexcept { return shapes_; }
    std::size_t size() const noexcept { return cells_.size(); }
    std::size_t total_depth() const noexcept;

    std::span<double> cells() noexcept { return cells_; }
    std::span<const double> cells() const noexcept { return cells_; }
    double& operator[](std::size_t i) { return cells_[i]; }
    double operator[](std::size_t i) const { return cells_[i]; }

    sketch& operator+=(const sketch& other);
    sketch& operator*=(double factor);

    bool operator==(const sketch&) const = default;

private:
    std::vector<sketch_shape> shapes_;
    std::vector<double> cells_;
};

/// Σ_t decay^(T-1-t) · sketches[t], oldest first, so the newest has weight 1.
/// An empty history yields the zero sketch of `shapes`.
sketch aggregate(std::span<const sketch> history, double decay, const std::vector<sketch_shape>& shapes);
sketch aggregate(std::span<const sketch> history, double decay);

/// L2-normalizes each width-row independently; zero rows stay zero.
sketch normalize_widthwise(const sketch& s);

sketch concat(std::span<const sketch> parts);

void save_sketch(const sketch& s, const std::filesystem::path& path);
sketch load_sketch(const std::filesystem::path& path);

}  // namespace emde
