#include "emde/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "emde/binary_io.hpp"
#include "emde/common.hpp"

namespace emde {

namespace {
constexpr char kGraphMagic[5] = "TGRF";
constexpr std::uint32_t kGraphVersion = 1;
}  // namespace

transition_graph::transition_graph(std::vector<city_id> node_ids, std::vector<edge> edges)
    : ids_(std::move(node_ids)), edges_(std::move(edges)) {
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], static_cast<node_index>(i)).second)
            throw error("duplicate node id '" + ids_[i] + "'");
    }
    std::sort(edges_.begin(), edges_.end(), [](const edge& a, const edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    out_.resize(ids_.size());
    in_.resize(ids_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const edge& e = edges_[i];
        if (e.src >= ids_.size() || e.dst >= ids_.size()) throw error("edge endpoint out of range");
        if (e.weight == 0) throw error("edge weight must be positive");
        if (i > 0 && edges_[i - 1].src == e.src && edges_[i - 1].dst == e.dst) throw error("duplicate edge");
        out_[e.src].push_back({e.dst, e.weight});
        in_[e.dst].push_back({e.src, e.weight});
    }
    // out_ is already sorted by neighbor; in_ is filled in ascending src order.
}

std::uint64_t transition_graph::total_weight() const noexcept {
    std::uint64_t total = 0;
    for (const auto& e : edges_) total += e.weight;
    return total;
}

std::uint64_t transition_graph::weight(node_index src, node_index dst) const {
    const auto& nbrs = out_.at(src);
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), dst,
                               [](const weighted_neighbor& n, node_index d) { return n.node < d; });
    return it != nbrs.end() && it->node == dst ? it->weight : 0;
}

node_index transition_graph::index_of(const city_id& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw error("unknown city '" + id + "'");
    return it->second;
}

transition_graph build_graph(const std::vector<std::vector<city_id>>& trips) {
    if (trips.empty()) throw error("no data");
    std::set<city_id> cities;
    for (const auto& trip : trips) {
        if (trip.empty()) throw error("trip with no cities");
        cities.insert(trip.begin(), trip.end());
    }
    std::vector<city_id> ids(cities.begin(), cities.end());
    std::unordered_map<city_id, node_index> index;
    for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], static_cast<node_index>(i));

    std::map<std::pair<node_index, node_index>, std::uint64_t> counts;
    for (const auto& trip : trips) {
        for (std::size_t i = 0; i + 1 < trip.size(); ++i) ++counts[{index.at(trip[i]), index.at(trip[i + 1])}];
    }
    std::vector<edge> edges;
    edges.reserve(counts.size());
    for (const auto& [key, w] : counts) edges.push_back({key.first, key.second, w});
    return transition_graph(std::move(ids), std::move(edges));
}

degree_summary degree_stats(const transition_graph& graph) {
    degree_summary s;
    s.nodes = graph.node_count();
    s.edges = graph.edge_count();
    for (std::size_t v = 0; v < s.nodes; ++v)
        s.max_out_degree = std::max(s.max_out_degree, graph.out_neighbors(static_cast<node_index>(v)).size());
    s.mean_out_degree = s.nodes ? static_cast<double>(s.edges) / static_cast<double>(s.nodes) : 0.0;
    return s;
}

void save_graph(const transition_graph& graph, const std::filesystem::path& path, std::uint64_t fingerprint) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot write " + path.string());
    io::write_header(os, kGraphMagic, kGraphVersion, fingerprint);
    io::write_pod<std::uint64_t>(os, graph.node_count());
    io::write_pod<std::uint64_t>(os, graph.edge_count());
    for (const auto& id : graph.node_ids()) io::write_string(os, id);
    for (const auto& e : graph.edges()) {
        io::write_pod(os, e.src);
        io::write_pod(os, e.dst);
        io::write_pod(os, e.weight);
    }
    if (!os) throw error("write failed: " + path.string());
}

transition_graph load_graph(const std::filesystem::path& path, std::uint64_t* fingerprint) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw error("cannot open " + path.string());
    const auto fp = io::read_header(is, kGraphMagic, kGraphVersion);
    if (fingerprint) *fingerprint = fp;
    const auto v = io::read_pod<std::uint64_t>(is);
    const auto e = io::read_pod<std::uint64_t>(is);
    if (v > (std::uint64_t{1} << 32) || e > (std::uint64_t{1} << 40)) throw error("corrupt graph header");
    std::vector<city_id> ids;
    ids.reserve(v);
    for (std::uint64_t i = 0; i < v; ++i) ids.push_back(io::read_string(is, 4096));
    std::vector<edge> edges;
    edges.reserve(e);
    for (std::uint64_t i = 0; i < e; ++i) {
        edge ed{};
        ed.src = io::read_pod<node_index>(is);
        ed.dst = io::read_pod<node_index>(is);
        ed.weight = io::read_pod<std::uint64_t>(is);
        edges.push_back(ed);
    }
    return transition_graph(std::move(ids), std::move(edges));
}

}  // namespace emde
