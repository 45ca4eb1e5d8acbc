#include "qchain/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "qchain/rng.hpp"

namespace qchain {

namespace {
constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}  // namespace

double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg,
                    double lon2_deg) {
    const double phi1 = lat1_deg * kDegToRad;
    const double phi2 = lat2_deg * kDegToRad;
    const double dphi = (lat2_deg - lat1_deg) * kDegToRad;
    const double dlambda = (lon2_deg - lon1_deg) * kDegToRad;
    const double a = std::sin(dphi / 2.0) * std::sin(dphi / 2.0) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2.0) *
                         std::sin(dlambda / 2.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double derive_length_km(const GraphNode& a, const GraphNode& b) {
    if (!a.has_coords() || !b.has_coords())
        throw TopologyError("length underivable: node " +
                            (a.has_coords() ? b.id : a.id) +
                            " has no coordinates");
    // Floor avoids degenerate zero-length links between co-located sites.
    return std::max(1.0, haversine_km(*a.latitude, *a.longitude, *b.latitude,
                                      *b.longitude));
}

int NetworkGraph::node_index(std::string_view id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
}

std::vector<std::vector<std::pair<int, double>>> NetworkGraph::adjacency()
    const {
    std::vector<std::vector<std::pair<int, double>>> adj(nodes.size());
    for (const GraphEdge& edge : edges) {
        adj[edge.u].emplace_back(edge.v, edge.length_km);
        adj[edge.v].emplace_back(edge.u, edge.length_km);
    }
    return adj;
}

namespace {

// Dijkstra that breaks equal-length ties toward the lexicographically
// smallest node-id sequence. Paths are materialized per node; topologies of
// interest are small (tens to hundreds of nodes).
struct DijkstraState {
    std::vector<double> dist;
    std::vector<std::vector<int>> path;  // node indices from the source
};

bool path_less(const NetworkGraph& graph, const std::vector<int>& a,
               const std::vector<int>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] != b[i]) return graph.nodes[a[i]].id < graph.nodes[b[i]].id;
    }
    return a.size() < b.size();
}

DijkstraState dijkstra_from(const NetworkGraph& graph, int src) {
    const auto adj = graph.adjacency();
    const double inf = std::numeric_limits<double>::infinity();
    DijkstraState state;
    state.dist.assign(graph.nodes.size(), inf);
    state.path.assign(graph.nodes.size(), {});
    state.dist[src] = 0.0;
    state.path[src] = {src};

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.emplace(0.0, src);
    std::vector<bool> settled(graph.nodes.size(), false);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (settled[u]) continue;
        settled[u] = true;
        for (const auto& [v, w] : adj[u]) {
            const double candidate = state.dist[u] + w;
            if (candidate < state.dist[v] - 1e-12) {
                state.dist[v] = candidate;
                state.path[v] = state.path[u];
                state.path[v].push_back(v);
                heap.emplace(candidate, v);
            } else if (std::abs(candidate - state.dist[v]) <= 1e-12 &&
                       !settled[v]) {
                std::vector<int> alternative = state.path[u];
                alternative.push_back(v);
                if (path_less(graph, alternative, state.path[v])) {
                    state.path[v] = std::move(alternative);
                    heap.emplace(candidate, v);
                }
            }
        }
    }
    return state;
}

UserPair pair_from_path(const NetworkGraph& graph, const std::vector<int>& path,
                        double length) {
    UserPair pair;
    pair.src = graph.nodes[path.front()].id;
    pair.dst = graph.nodes[path.back()].id;
    pair.path.reserve(path.size());
    for (int idx : path) pair.path.push_back(graph.nodes[idx].id);
    pair.path_length_km = length;
    pair.n_repeaters = path.size() - 2;
    return pair;
}

}  // namespace

UserPair shortest_path(const NetworkGraph& graph, std::string_view src,
                       std::string_view dst) {
    const int s = graph.node_index(src);
    const int t = graph.node_index(dst);
    if (s < 0 || t < 0)
        throw TopologyError("unknown node id in shortest_path query");
    if (s == t) throw TopologyError("shortest_path requires distinct nodes");
    const DijkstraState state = dijkstra_from(graph, s);
    if (!std::isfinite(state.dist[t]))
        throw TopologyError("no path between " + std::string(src) + " and " +
                            std::string(dst));
    return pair_from_path(graph, state.path[t], state.dist[t]);
}

PairSelection select_user_pairs(const NetworkGraph& graph, double min_km,
                                double max_km, std::size_t min_repeaters,
                                std::size_t count, std::uint64_t seed) {
    std::vector<UserPair> qualifying;
    for (int s = 0; s < static_cast<int>(graph.nodes.size()); ++s) {
        const DijkstraState state = dijkstra_from(graph, s);
        for (int t = 0; t < static_cast<int>(graph.nodes.size()); ++t) {
            if (t == s || !std::isfinite(state.dist[t])) continue;
            if (state.dist[t] < min_km || state.dist[t] > max_km) continue;
            if (state.path[t].size() < min_repeaters + 2) continue;
            qualifying.push_back(
                pair_from_path(graph, state.path[t], state.dist[t]));
        }
    }
    if (qualifying.empty())
        throw TopologyError(
            "no user pair has a shortest path in [" + std::to_string(min_km) +
            ", " + std::to_string(max_km) + "] km with at least " +
            std::to_string(min_repeaters) + " repeaters");

    PairSelection selection;
    selection.qualifying = qualifying.size();
    selection.truncated = qualifying.size() < count;
    // Seeded partial Fisher-Yates: a uniform sample without replacement.
    Rng rng(mix64(seed ^ 0x746f706f6c6f6779ULL));
    const std::size_t take = std::min(count, qualifying.size());
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.next() % (qualifying.size() - i));
        std::swap(qualifying[i], qualifying[j]);
    }
    qualifying.resize(take);
    selection.pairs = std::move(qualifying);
    return selection;
}

ChainSpec chain_from_pair(const NetworkGraph& graph, const UserPair& pair,
                          const ChainDefaults& defaults) {
    const auto adj = graph.adjacency();
    ChainSpec chain;
    chain.mu_swap = defaults.mu_swap;
    chain.tau_coh_s = defaults.tau_coh_s;
    chain.cutoff_s = defaults.cutoff_s;
    for (std::size_t i = 0; i + 1 < pair.path.size(); ++i) {
        const int u = graph.node_index(pair.path[i]);
        const int v = graph.node_index(pair.path[i + 1]);
        if (u < 0 || v < 0) throw TopologyError("path references unknown node");
        double length = -1.0;
        for (const auto& [to, w] : adj[u])
            if (to == v) length = w;
        if (length < 0.0)
            throw TopologyError("path edge " + pair.path[i] + "-" +
                                pair.path[i + 1] + " is not in the graph");
        chain.links.push_back(LinkSpec{.length_km = length,
                                       .p_link = defaults.p_link,
                                       .fidelity = defaults.fidelity,
                                       .mu_link = defaults.mu_link});
    }
    validate(chain);
    return chain;
}

}  // namespace qchain
