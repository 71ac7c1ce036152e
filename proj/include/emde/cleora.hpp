#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "emde/graph.hpp"

namespace emde {

/// V rows of unit-norm city vectors produced after `iteration` averaging steps.
class embedding_table {
public:
    embedding_table() = default;
    embedding_table(std::size_t rows, std::size_t dim, unsigned iteration = 0, std::uint64_t seed = 0)
        : rows_(rows), dim_(dim), iteration_(iteration), seed_(seed), data_(rows * dim, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }
    unsigned iteration() const noexcept { return iteration_; }
    std::uint64_t seed() const noexcept { return seed_; }
    void set_iteration(unsigned i) noexcept { iteration_ = i; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const embedding_table&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    unsigned iteration_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> data_;
};

struct cleora_options {
    // Average over out-neighbors only instead of the symmetrized neighborhood.
    bool directed_only = false;
};

/// Entries uniform on {-1,+1}, keyed by (seed, row, column) so a row does not
/// depend on the table size; rows are then L2-normalized.
embedding_table init_embeddings(std::size_t node_count, std::size_t dim, std::uint64_t seed);

/// Jacobi steps of weighted neighbor averaging followed by per-row L2 normalization.
/// Rows with no neighbors, or whose average collapses below 1e-12 in norm, keep their previous value.
embedding_table iterate(const embedding_table& table, const transition_graph& graph, unsigned steps,
                        const cleora_options& options = {});

/// One table per requested iteration count, all sharing the same initialization.
std::vector<embedding_table> embed_cities(const transition_graph& graph, std::size_t dim,
                                          const std::vector<unsigned>& iterations, std::uint64_t seed,
                                          const cleora_options& options = {});

void save_embeddings(const embedding_table& table, const std::filesystem::path& path, std::uint64_t fingerprint = 0);
embedding_table load_embeddings(const std::filesystem::path& path, std::uint64_t* fingerprint = nullptr);

}  // namespace emde
