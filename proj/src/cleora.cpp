#include "emde/cleora.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "emde/binary_io.hpp"
#include "emde/common.hpp"

namespace emde {

namespace {

constexpr char kEmbeddingMagic[5] = "CEMB";
constexpr std::uint32_t kEmbeddingVersion = 1;
constexpr double kCollapseNorm = 1e-12;

// Per-node neighbor lists in ascending neighbor order. The symmetrized
// neighborhood of v weights u by w(v->u) + w(u->v); a self-loop counts once.
std::vector<std::vector<weighted_neighbor>> neighborhoods(const transition_graph& graph, bool directed_only) {
    const std::size_t v_count = graph.node_count();
    std::vector<std::vector<weighted_neighbor>> result(v_count);
    for (std::size_t v = 0; v < v_count; ++v) {
        const auto node = static_cast<node_index>(v);
        const auto& out = graph.out_neighbors(node);
        if (directed_only) {
            result[v] = out;
            continue;
        }
        const auto& in = graph.in_neighbors(node);
        auto& merged = result[v];
        merged.reserve(out.size() + in.size());
        std::size_t i = 0, j = 0;
        while (i < out.size() || j < in.size()) {
            if (j == in.size() || (i < out.size() && out[i].node < in[j].node)) {
                merged.push_back(out[i++]);
            } else if (i == out.size() || in[j].node < out[i].node) {
                merged.push_back(in[j++]);
            } else {
                const bool self = out[i].node == node;
                merged.push_back({out[i].node, self ? out[i].weight : out[i].weight + in[j].weight});
                ++i;
                ++j;
            }
        }
    }
    return result;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

embedding_table init_embeddings(std::size_t node_count, std::size_t dim, std::uint64_t seed) {
    if (node_count == 0) throw error("init_embeddings: node_count must be positive");
    if (dim < 2) throw error("init_embeddings: dim must be at least 2");
    embedding_table table(node_count, dim, 0, seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t r = 0; r < node_count; ++r) {
        auto row = table.row(r);
        for (std::size_t c = 0; c < dim; ++c) row[c] = (mix64(seed, r, c) & 1) ? scale : -scale;
    }
    return table;
}

embedding_table iterate(const embedding_table& table, const transition_graph& graph, unsigned steps,
                        const cleora_options& options) {
    if (table.rows() != graph.node_count())
        throw error("iterate: table has " + std::to_string(table.rows()) + " rows but graph has " +
                    std::to_string(graph.node_count()) + " nodes");
    const auto nbrs = neighborhoods(graph, options.directed_only);
    const std::size_t dim = table.dim();
    embedding_table current = table;
    embedding_table next = table;
    std::vector<double> acc(dim);
    for (unsigned step = 0; step < steps; ++step) {
        for (std::size_t v = 0; v < current.rows(); ++v) {
            auto out = next.row(v);
            const auto prev = current.row(v);
            if (nbrs[v].empty()) {
                std::copy(prev.begin(), prev.end(), out.begin());
                continue;
            }
            std::fill(acc.begin(), acc.end(), 0.0);
            double total = 0.0;
            for (const auto& [u, w] : nbrs[v]) {
                const double wd = static_cast<double>(w);
                const auto src = current.row(u);
                for (std::size_t c = 0; c < dim; ++c) acc[c] += wd * src[c];
                total += wd;
            }
            for (double& x : acc) x /= total;
            const double norm = l2_norm(acc);
            if (!(norm >= kCollapseNorm)) {
                std::copy(prev.begin(), prev.end(), out.begin());
                continue;
            }
            for (std::size_t c = 0; c < dim; ++c) out[c] = acc[c] / norm;
        }
        std::swap(current, next);
    }
    current.set_iteration(table.iteration() + steps);
    return current;
}

std::vector<embedding_table> embed_cities(const transition_graph& graph, std::size_t dim,
                                          const std::vector<unsigned>& iterations, std::uint64_t seed,
                                          const cleora_options& options) {
    if (iterations.empty()) throw error("embed_cities: no iteration counts requested");
    for (unsigned it : iterations)
        if (it < 1) throw error("embed_cities: iteration counts must be >= 1");

    std::vector<unsigned> sorted = iterations;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::map<unsigned, embedding_table> by_count;
    embedding_table current = init_embeddings(graph.node_count(), dim, seed);
    for (unsigned target : sorted) {
        current = iterate(current, graph, target - current.iteration(), options);
        by_count.emplace(target, current);
    }
    std::vector<embedding_table> result;
    result.reserve(iterations.size());
    for (unsigned it : iterations) result.push_back(by_count.at(it));
    return result;
}

void save_embeddings(const embedding_table& table, const std::filesystem::path& path, std::uint64_t fingerprint) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot write " + path.string());
    io::write_header(os, kEmbeddingMagic, kEmbeddingVersion, fingerprint);
    io::write_pod<std::uint64_t>(os, table.rows());
    io::write_pod<std::uint64_t>(os, table.dim());
    io::write_pod<std::uint32_t>(os, table.iteration());
    io::write_pod<std::uint64_t>(os, table.seed());
    std::vector<float> buf(table.data().begin(), table.data().end());
    io::write_span<float>(os, buf);
    if (!os) throw error("write failed: " + path.string());
}

embedding_table load_embeddings(const std::filesystem::path& path, std::uint64_t* fingerprint) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw error("cannot open " + path.string());
    const auto fp = io::read_header(is, kEmbeddingMagic, kEmbeddingVersion);
    if (fingerprint) *fingerprint = fp;
    const auto rows = io::read_pod<std::uint64_t>(is);
    const auto dim = io::read_pod<std::uint64_t>(is);
    const auto iteration = io::read_pod<std::uint32_t>(is);
    const auto seed = io::read_pod<std::uint64_t>(is);
    if (rows == 0 || dim == 0 || rows * dim > (std::uint64_t{1} << 34)) throw error("corrupt embedding header");
    std::vector<float> buf(rows * dim);
    io::read_span<float>(is, buf);
    embedding_table table(rows, dim, iteration, seed);
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = table.row(r);
        for (std::size_t c = 0; c < dim; ++c) row[c] = buf[r * dim + c];
        // float storage perturbs norms by ~1e-7; restore the unit-norm invariant
        const double norm = l2_norm(row);
        if (norm >= kCollapseNorm)
            for (double& x : row) x /= norm;
    }
    return table;
}

}  // namespace emde
