#include "emde/sketch.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "emde/binary_io.hpp"
#include "emde/common.hpp"

namespace emde {

namespace {
constexpr char kSketchMagic[5] = "SKCH";
constexpr std::uint32_t kSketchVersion = 1;

std::size_t total_size(const std::vector<sketch_shape>& shapes) {
    return std::accumulate(shapes.begin(), shapes.end(), std::size_t{0},
                           [](std::size_t acc, const sketch_shape& s) { return acc + s.size(); });
}
}  // namespace

sketch::sketch(std::vector<sketch_shape> shapes) : shapes_(std::move(shapes)), cells_(total_size(shapes_), 0.0) {}

sketch::sketch(std::vector<sketch_shape> shapes, std::vector<double> cells)
    : shapes_(std::move(shapes)), cells_(std::move(cells)) {
    if (cells_.size() != total_size(shapes_)) throw error("sketch: cell count does not match shapes");
}

std::size_t sketch::total_depth() const noexcept {
    std::size_t d = 0;
    for (const auto& s : shapes_) d += s.depth;
    return d;
}

sketch& sketch::operator+=(const sketch& other) {
    if (shapes_ != other.shapes_) throw error("sketch shape mismatch");
    for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
    return *this;
}

sketch& sketch::operator*=(double factor) {
    for (double& c : cells_) c *= factor;
    return *this;
}

sketch aggregate(std::span<const sketch> history, double decay, const std::vector<sketch_shape>& shapes) {
    if (!(decay > 0.0 && decay <= 1.0)) throw error("aggregate: decay must lie in (0, 1]");
    sketch result(shapes);
    auto out = result.cells();
    double weight = 1.0;
    // newest first, so the weight is decay^(recency rank)
    for (std::size_t t = history.size(); t-- > 0;) {
        if (history[t].shapes() != shapes) throw error("aggregate: sketch shape mismatch");
        const auto in = history[t].cells();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weight * in[i];
        weight *= decay;
    }
    return result;
}

sketch aggregate(std::span<const sketch> history, double decay) {
    if (history.empty()) throw error("aggregate: empty history needs explicit shapes");
    return aggregate(history, decay, history.front().shapes());
}

sketch normalize_widthwise(const sketch& s) {
    sketch result = s;
    auto cells = result.cells();
    std::size_t offset = 0;
    for (const auto& shape : s.shapes()) {
        for (std::uint32_t n = 0; n < shape.depth; ++n) {
            auto row = cells.subspan(offset, shape.width);
            double sq = 0.0;
            for (double x : row) sq += x * x;
            if (sq > 0.0) {
                const double inv = 1.0 / std::sqrt(sq);
                for (double& x : row) x *= inv;
            }
            offset += shape.width;
        }
    }
    return result;
}

sketch concat(std::span<const sketch> parts) {
    std::vector<sketch_shape> shapes;
    std::vector<double> cells;
    for (const auto& p : parts) {
        shapes.insert(shapes.end(), p.shapes().begin(), p.shapes().end());
        cells.insert(cells.end(), p.cells().begin(), p.cells().end());
    }
    return sketch(std::move(shapes), std::move(cells));
}

void save_sketch(const sketch& s, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot write " + path.string());
    io::write_header(os, kSketchMagic, kSketchVersion, 0);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.shapes().size()));
    for (const auto& shape : s.shapes()) {
        io::write_pod(os, shape.depth);
        io::write_pod(os, shape.width);
    }
    std::vector<float> buf(s.cells().begin(), s.cells().end());
    io::write_span<float>(os, buf);
}

sketch load_sketch(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw error("cannot open " + path.string());
    io::read_header(is, kSketchMagic, kSketchVersion);
    const auto modalities = io::read_pod<std::uint32_t>(is);
    if (modalities > 1024) throw error("corrupt sketch header");
    std::vector<sketch_shape> shapes(modalities);
    for (auto& shape : shapes) {
        shape.depth = io::read_pod<std::uint32_t>(is);
        shape.width = io::read_pod<std::uint32_t>(is);
        if (shape.depth > 65536 || shape.width > 65536) throw error("corrupt sketch header");
    }
    std::vector<float> buf(total_size(shapes));
    io::read_span<float>(is, buf);
    return sketch(std::move(shapes), std::vector<double>(buf.begin(), buf.end()));
}

}  // namespace emde
