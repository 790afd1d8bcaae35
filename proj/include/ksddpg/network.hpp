#pragma once

#include <map>
#include <string>
#include <vector>

namespace ksddpg {

enum class NodeKind { Signalized, Unsignalized, Boundary };
enum class TurnKind { Through, Left, Right };

struct Node {
    std::string id;
    NodeKind kind = NodeKind::Boundary;
};

/// Directed road segment. The point-queue model needs only aggregate geometry:
/// a free-flow pipe (length / speed) feeding a capacity-discharged queue.
struct Link {
    std::string id;
    int from = -1;
    int to = -1;
    double length_ft = 600.0;
    int lanes = 1;
    double free_flow_speed_fps = 73.3333333333;  // 50 mph
    double saturation_flow_vps = 0.5;            // per lane

    double free_flow_time_s() const { return length_ft / free_flow_speed_fps; }
    /// Vehicles the link can hold at 25 ft jam spacing.
    int jam_capacity() const;
};

struct Movement {
    std::string id;
    int from_link = -1;
    int to_link = -1;
    TurnKind turn = TurnKind::Through;
};

/// One set of mutually compatible movements receiving green together.
/// Compatibility is declared by the network author, not derived.
struct Phase {
    std::vector<int> movements;
};

struct RoadNetwork {
    std::vector<Node> nodes;
    std::vector<Link> links;
    std::vector<Movement> movements;
    /// Indexed by node; empty for non-signalized nodes.
    std::vector<std::vector<Phase>> phases;

    // Derived indexes, rebuilt by finalize().
    std::map<std::string, int> node_index;
    std::map<std::string, int> link_index;
    std::vector<int> signalized;    // ascending node id
    std::vector<int> unsignalized;  // ascending node id
    std::vector<std::vector<int>> in_links;
    std::vector<std::vector<int>> out_links;
    std::vector<std::vector<int>> movements_from_link;
    /// movement index for (from_link, to_link), -1 if absent.
    int movement_between(int from_link, int to_link) const;

    int phase_count(int node) const { return static_cast<int>(phases[node].size()); }
    /// True when every movement of the phase is a left turn (left-turn green bounds apply).
    bool phase_is_left_only(int node, int phase) const;
    /// Entrance lane count of a signalized node = sum of lanes over incoming links.
    int entrance_lane_count(int node) const;

    int node_of(const std::string& id) const;
    int link_of(const std::string& id) const;

    /// Rebuilds indexes and checks structural invariants; throws ValidationError.
    void finalize();
};

struct GridOptions {
    double link_length_ft = 600.0;
    int lanes = 1;
    double free_flow_speed_fps = 73.3333333333;
    double saturation_flow_vps = 0.5;
};

/// Manhattan grid of rows x cols four-phase signalized intersections.
/// Every exterior approach ends in a boundary node; the four corner boundary
/// nodes are destination-only sinks fed from the corner intersections.
/// Phase order per intersection: northbound, southbound, westbound, eastbound,
/// each serving the whole approach (left+through+right on the shared lane).
RoadNetwork build_grid(int rows, int cols, const GridOptions& opt = {});

inline constexpr const char* kNetworkSchema = "ksddpg-net-1";

RoadNetwork load_network(const std::string& path);
RoadNetwork network_from_json_text(const std::string& text);
std::string network_to_json_text(const RoadNetwork& net);
void save_network(const RoadNetwork& net, const std::string& path);

} // namespace ksddpg
