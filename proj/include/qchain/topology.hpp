#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qchain/chain.hpp"

namespace qchain {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TopologyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GraphNode {
    std::string id;
    std::string label;
    std::optional<double> latitude;
    std::optional<double> longitude;

    bool has_coords() const { return latitude && longitude; }
};

struct GraphEdge {
    int u = 0;  // node indices, u < v after normalization
    int v = 0;
    double length_km = 0.0;
};

/// Undirected geographic topology with haversine-derived link lengths.
struct NetworkGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    // Edges whose endpoints lack coordinates; retained for inspection.
    std::vector<std::pair<int, int>> unmeasured_edges;

    int node_index(std::string_view id) const;  // -1 if unknown
    std::vector<std::vector<std::pair<int, double>>> adjacency() const;
};

/// Great-circle distance, Earth radius 6371 km.
double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg,
                    double lon2_deg);

/// Haversine distance floored at 1 km. Throws TopologyError if either node
/// lacks coordinates.
double derive_length_km(const GraphNode& a, const GraphNode& b);

/// Parses a Topology-Zoo-style GraphML document (Latitude/Longitude node
/// keys). Self-loops are dropped, duplicate edges deduplicated, lengths
/// scaled by length_scale (fiber-to-geodesic inflation, default 1).
/// Throws ParseError with line context on malformed input.
NetworkGraph parse_graphml(std::string_view xml, double length_scale = 1.0);
NetworkGraph load_graphml(const std::string& path, double length_scale = 1.0);

/// Serializes back to GraphML (used for the reparse-idempotence property).
std::string to_graphml(const NetworkGraph& graph);

struct UserPair {
    std::string src;
    std::string dst;
    std::vector<std::string> path;  // node ids, src first
    double path_length_km = 0.0;
    std::size_t n_repeaters = 0;    // |path| - 2
};

/// Minimum-length path by Dijkstra; equal-length ties resolve to the
/// lexicographically smallest node-id sequence. Throws TopologyError if the
/// pair is disconnected.
UserPair shortest_path(const NetworkGraph& graph, std::string_view src,
                       std::string_view dst);

struct PairSelection {
    std::vector<UserPair> pairs;
    bool truncated = false;       // fewer qualifying pairs than requested
    std::size_t qualifying = 0;   // size of the qualifying set
};

/// Seeded uniform sample (without replacement) of ordered pairs whose
/// shortest path satisfies min_km <= length <= max_km and
/// n_repeaters >= min_repeaters. Throws TopologyError if nothing qualifies.
PairSelection select_user_pairs(const NetworkGraph& graph, double min_km,
                                double max_km, std::size_t min_repeaters,
                                std::size_t count, std::uint64_t seed);

/// Noise parameters shared by every link of a chain built from a path.
struct ChainDefaults {
    double p_link = 1.0;
    double fidelity = 1.0;
    double mu_link = 1.0;
    double mu_swap = 1.0;
    double tau_coh_s = 0.1;
    std::optional<double> cutoff_s;
};

ChainSpec chain_from_pair(const NetworkGraph& graph, const UserPair& pair,
                          const ChainDefaults& defaults);

}  // namespace qchain
