#include "emde/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "emde/binary_io.hpp"
#include "emde/common.hpp"

namespace emde {

namespace {

constexpr char kCodesMagic[5] = "CODE";
constexpr std::uint32_t kCodesVersion = 1;

void check_width(std::uint32_t width) {
    if (width < 2 || width > 65536 || !std::has_single_bit(width))
        throw error("sketch width must be a power of two in [2, 65536], got " + std::to_string(width));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool has_two_distinct_rows(const embedding_table& e) {
    for (std::size_t r = 1; r < e.rows(); ++r) {
        const auto a = e.row(0);
        const auto b = e.row(r);
        if (!std::equal(a.begin(), a.end(), b.begin())) return true;
    }
    return false;
}

double median(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

codes_matrix::codes_matrix(std::size_t cities, sketch_shape shape, modality_kind kind, std::uint32_t source_iteration,
                           std::uint64_t seed)
    : cities_(cities),
      shape_(shape),
      kind_(kind),
      source_iteration_(source_iteration),
      seed_(seed),
      ids_(cities * shape.depth, 0) {
    if (shape.width == 0 || shape.width > 65536) throw error("codes width out of range");
}

partitioning fit_partition(const embedding_table& embeddings, std::uint32_t width, std::uint64_t seed) {
    check_width(width);
    if (embeddings.rows() < 2 || !has_two_distinct_rows(embeddings)) throw error("degenerate manifold");

    partitioning part;
    part.width = width;
    part.seed = seed;
    const auto planes = static_cast<unsigned>(std::countr_zero(width));
    const std::size_t dim = embeddings.dim();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> projections(embeddings.rows());
    for (unsigned j = 0; j < planes; ++j) {
        hyperplane h;
        h.direction.resize(dim);
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (double& x : h.direction) {
                x = gauss(rng);
                norm += x * x;
            }
            norm = std::sqrt(norm);
        }
        for (double& x : h.direction) x /= norm;
        for (std::size_t r = 0; r < embeddings.rows(); ++r) projections[r] = dot(h.direction, embeddings.row(r));
        h.threshold = median(projections);
        part.hyperplanes.push_back(std::move(h));
    }
    return part;
}

std::uint32_t assign_region(const partitioning& part, std::span<const double> vector) {
    std::uint32_t region = 0;
    for (std::size_t j = 0; j < part.hyperplanes.size(); ++j) {
        const auto& h = part.hyperplanes[j];
        if (h.direction.size() != vector.size()) throw error("assign_region: dimension mismatch");
        if (dot(h.direction, vector) > h.threshold) region |= std::uint32_t{1} << j;
    }
    return region;
}

codes_matrix build_codes(const embedding_table& embeddings, std::uint32_t width, std::uint32_t depth,
                         std::uint64_t seed) {
    check_width(width);
    if (depth == 0) throw error("sketch depth must be positive");
    codes_matrix codes(embeddings.rows(), {depth, width}, modality_kind::lsh, embeddings.iteration(), seed);
    for (std::uint32_t n = 0; n < depth; ++n) {
        const partitioning part = fit_partition(embeddings, width, seed + n);
        for (std::size_t c = 0; c < embeddings.rows(); ++c)
            codes.row(c)[n] = static_cast<std::uint16_t>(assign_region(part, embeddings.row(c)));
    }
    return codes;
}

codes_matrix build_random_codes(std::size_t city_count, std::uint32_t width, std::uint32_t depth, std::uint64_t seed) {
    if (width == 0 || depth == 0) throw error("random codes need positive width and depth");
    codes_matrix codes(city_count, {depth, width}, modality_kind::random, 0, seed);
    for (std::size_t c = 0; c < city_count; ++c) {
        auto row = codes.row(c);
        for (std::uint32_t n = 0; n < depth; ++n)
            row[n] = static_cast<std::uint16_t>(unit_from_bits(mix64(seed, c, n)) * width);
    }
    return codes;
}

sketch item_sketch(std::span<const std::uint16_t> codes_row, sketch_shape shape) {
    if (codes_row.size() != shape.depth) throw error("item_sketch: codes row length differs from depth");
    sketch s(shape);
    for (std::uint32_t n = 0; n < shape.depth; ++n) {
        if (codes_row[n] >= shape.width) throw error("item_sketch: region id out of range");
        s[std::size_t{n} * shape.width + codes_row[n]] = 1.0;
    }
    return s;
}

sketch item_sketch(std::span<const codes_matrix> modalities, std::size_t city) {
    std::vector<sketch> parts;
    parts.reserve(modalities.size());
    for (const auto& m : modalities) parts.push_back(item_sketch(m.row(city), m.shape()));
    return concat(parts);
}

void save_codes(const codes_matrix& codes, const std::filesystem::path& path, std::uint64_t fingerprint) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot write " + path.string());
    io::write_header(os, kCodesMagic, kCodesVersion, fingerprint);
    io::write_pod<std::uint64_t>(os, codes.cities());
    io::write_pod<std::uint32_t>(os, codes.depth());
    io::write_pod<std::uint32_t>(os, codes.width());
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(codes.kind()));
    io::write_pod<std::uint32_t>(os, codes.source_iteration());
    io::write_pod<std::uint64_t>(os, codes.seed());
    io::write_span<std::uint16_t>(os, codes.data());
    if (!os) throw error("write failed: " + path.string());
}

codes_matrix load_codes(const std::filesystem::path& path, std::uint64_t* fingerprint) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw error("cannot open " + path.string());
    const auto fp = io::read_header(is, kCodesMagic, kCodesVersion);
    if (fingerprint) *fingerprint = fp;
    const auto cities = io::read_pod<std::uint64_t>(is);
    const auto depth = io::read_pod<std::uint32_t>(is);
    const auto width = io::read_pod<std::uint32_t>(is);
    const auto kind = io::read_pod<std::uint32_t>(is);
    const auto iteration = io::read_pod<std::uint32_t>(is);
    const auto seed = io::read_pod<std::uint64_t>(is);
    if (kind > 1 || depth == 0 || depth > 65536 || width == 0 || width > 65536 || cities > (std::uint64_t{1} << 32))
        throw error("corrupt codes header");
    codes_matrix codes(cities, {depth, width}, static_cast<modality_kind>(kind), iteration, seed);
    for (std::size_t c = 0; c < cities; ++c) {
        auto row = codes.row(c);
        io::read_span<std::uint16_t>(is, row);
        for (auto id : row)
            if (id >= width) throw error("corrupt codes: region id out of range");
    }
    return codes;
}

}  // namespace emde
