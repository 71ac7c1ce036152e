#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace emde {

using city_id = std::string;
using node_index = std::uint32_t;

struct weighted_neighbor {
    node_index node;
    std::uint64_t weight;
    bool operator==(const weighted_neighbor&) const = default;
};

struct edge {
    node_index src;
    node_index dst;
    std::uint64_t weight;
    bool operator==(const edge&) const = default;
};

struct degree_summary {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t max_out_degree = 0;
    double mean_out_degree = 0.0;
};

/// Directed weighted city-transition graph. Parallel transitions collapse into a
/// single edge whose weight counts them; self-loops are kept. Immutable once built.
class transition_graph {
public:
    transition_graph() = default;

    /// Builds from explicit node ids and (src, dst, weight) edges; validates invariants.
    transition_graph(std::vector<city_id> node_ids, std::vector<edge> edges);

    std::size_t node_count() const noexcept { return ids_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    std::uint64_t total_weight() const noexcept;

    const std::vector<city_id>& node_ids() const noexcept { return ids_; }
    // Sorted by (src, dst).
    const std::vector<edge>& edges() const noexcept { return edges_; }
    const std::vector<weighted_neighbor>& out_neighbors(node_index v) const { return out_.at(v); }
    const std::vector<weighted_neighbor>& in_neighbors(node_index v) const { return in_.at(v); }

    /// Returns the edge weight or 0 when absent.
    std::uint64_t weight(node_index src, node_index dst) const;

    bool contains(const city_id& id) const { return index_.contains(id); }
    node_index index_of(const city_id& id) const;

    bool operator==(const transition_graph& o) const { return ids_ == o.ids_ && edges_ == o.edges_; }

private:
    std::vector<city_id> ids_;
    std::unordered_map<city_id, node_index> index_;
    std::vector<edge> edges_;
    std::vector<std::vector<weighted_neighbor>> out_;
    std::vector<std::vector<weighted_neighbor>> in_;
};

/// Counts consecutive transitions within each trip. Node indices are assigned in
/// ascending city-id order, so the result is independent of trip order.
transition_graph build_graph(const std::vector<std::vector<city_id>>& trips);

degree_summary degree_stats(const transition_graph& graph);

void save_graph(const transition_graph& graph, const std::filesystem::path& path, std::uint64_t fingerprint = 0);
transition_graph load_graph(const std::filesystem::path& path, std::uint64_t* fingerprint = nullptr);

}  // namespace emde
