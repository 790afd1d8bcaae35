#include "ksddpg/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ksddpg/errors.hpp"

namespace ksddpg {

namespace {
constexpr double kJamSpacingFt = 25.0;

std::string kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Signalized: return "signalized";
        case NodeKind::Unsignalized: return "unsignalized";
        case NodeKind::Boundary: return "boundary";
    }
    return "?";
}

NodeKind kind_from(const std::string& s, const std::string& where) {
    if (s == "signalized") return NodeKind::Signalized;
    if (s == "unsignalized") return NodeKind::Unsignalized;
    if (s == "boundary") return NodeKind::Boundary;
    throw ParseError(where + ": unknown node kind '" + s + "'");
}

std::string turn_name(TurnKind t) {
    switch (t) {
        case TurnKind::Through: return "through";
        case TurnKind::Left: return "left";
        case TurnKind::Right: return "right";
    }
    return "?";
}

TurnKind turn_from(const std::string& s, const std::string& where) {
    if (s == "through") return TurnKind::Through;
    if (s == "left") return TurnKind::Left;
    if (s == "right") return TurnKind::Right;
    throw ParseError(where + ": unknown turn '" + s + "'");
}
} // namespace

int Link::jam_capacity() const {
    return std::max(1, static_cast<int>(std::floor(lanes * length_ft / kJamSpacingFt)));
}

int RoadNetwork::movement_between(int from_link, int to_link) const {
    for (int m : movements_from_link[from_link]) {
        if (movements[m].to_link == to_link) return m;
    }
    return -1;
}

bool RoadNetwork::phase_is_left_only(int node, int phase) const {
    const Phase& p = phases[node][phase];
    if (p.movements.empty()) return false;
    for (int m : p.movements) {
        if (movements[m].turn != TurnKind::Left) return false;
    }
    return true;
}

int RoadNetwork::entrance_lane_count(int node) const {
    int total = 0;
    for (int l : in_links[node]) total += links[l].lanes;
    return total;
}

int RoadNetwork::node_of(const std::string& id) const {
    auto it = node_index.find(id);
    if (it == node_index.end()) throw ConfigError("unknown node id '" + id + "'");
    return it->second;
}

int RoadNetwork::link_of(const std::string& id) const {
    auto it = link_index.find(id);
    if (it == link_index.end()) throw ConfigError("unknown link id '" + id + "'");
    return it->second;
}

void RoadNetwork::finalize() {
    node_index.clear();
    link_index.clear();
    signalized.clear();
    unsignalized.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!node_index.emplace(nodes[i].id, static_cast<int>(i)).second) {
            throw ValidationError("nodes: duplicate id '" + nodes[i].id + "'");
        }
    }
    in_links.assign(nodes.size(), {});
    out_links.assign(nodes.size(), {});
    for (std::size_t i = 0; i < links.size(); ++i) {
        const Link& l = links[i];
        if (!link_index.emplace(l.id, static_cast<int>(i)).second) {
            throw ValidationError("links: duplicate id '" + l.id + "'");
        }
        if (l.from < 0 || l.from >= static_cast<int>(nodes.size()) || l.to < 0 ||
            l.to >= static_cast<int>(nodes.size()) || l.from == l.to) {
            throw ValidationError("links['" + l.id + "']: bad endpoints");
        }
        if (l.length_ft <= 0 || l.lanes < 1 || l.free_flow_speed_fps <= 0 ||
            l.saturation_flow_vps <= 0) {
            throw ValidationError("links['" + l.id + "']: non-positive geometry");
        }
        out_links[l.from].push_back(static_cast<int>(i));
        in_links[l.to].push_back(static_cast<int>(i));
    }
    movements_from_link.assign(links.size(), {});
    for (std::size_t i = 0; i < movements.size(); ++i) {
        const Movement& m = movements[i];
        if (m.from_link < 0 || m.from_link >= static_cast<int>(links.size()) || m.to_link < 0 ||
            m.to_link >= static_cast<int>(links.size())) {
            throw ValidationError("movements['" + m.id + "']: bad link reference");
        }
        if (links[m.from_link].to != links[m.to_link].from) {
            throw ValidationError("movements['" + m.id + "']: links do not share a node");
        }
        movements_from_link[m.from_link].push_back(static_cast<int>(i));
    }
    if (phases.size() != nodes.size()) phases.resize(nodes.size());
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        if (nodes[n].kind != NodeKind::Signalized) {
            if (!phases[n].empty()) {
                throw ValidationError("nodes['" + nodes[n].id + "']: phases on a non-signalized node");
            }
            if (nodes[n].kind == NodeKind::Unsignalized) {
                unsignalized.push_back(static_cast<int>(n));
            }
            continue;
        }
        if (phases[n].size() < 2) {
            throw ValidationError("nodes['" + nodes[n].id + "']: signalized node needs >= 2 phases");
        }
        for (const Phase& p : phases[n]) {
            for (int m : p.movements) {
                if (m < 0 || m >= static_cast<int>(movements.size())) {
                    throw ValidationError("nodes['" + nodes[n].id + "']: phase references unknown movement");
                }
                if (links[movements[m].from_link].to != static_cast<int>(n)) {
                    throw ValidationError("nodes['" + nodes[n].id + "']: phase serves movement '" +
                                          movements[m].id + "' of another node");
                }
            }
        }
        signalized.push_back(static_cast<int>(n));
    }
    auto by_id = [this](int a, int b) { return nodes[a].id < nodes[b].id; };
    std::sort(signalized.begin(), signalized.end(), by_id);
    std::sort(unsignalized.begin(), unsignalized.end(), by_id);
}

// --- grid construction ---------------------------------------------------

namespace {

struct GridBuilder {
    int rows, cols;
    GridOptions opt;
    RoadNetwork net;

    int add_node(const std::string& id, NodeKind kind) {
        net.nodes.push_back({id, kind});
        return static_cast<int>(net.nodes.size()) - 1;
    }

    int add_link(int from, int to) {
        Link l;
        l.id = net.nodes[from].id + "->" + net.nodes[to].id;
        l.from = from;
        l.to = to;
        l.length_ft = opt.link_length_ft;
        l.lanes = opt.lanes;
        l.free_flow_speed_fps = opt.free_flow_speed_fps;
        l.saturation_flow_vps = opt.saturation_flow_vps;
        net.links.push_back(l);
        return static_cast<int>(net.links.size()) - 1;
    }

    int add_movement(int from_link, int to_link, TurnKind turn) {
        Movement m;
        m.id = net.links[from_link].id + ":" + turn_name(turn) + ":" + net.links[to_link].id;
        m.from_link = from_link;
        m.to_link = to_link;
        m.turn = turn;
        net.movements.push_back(m);
        return static_cast<int>(net.movements.size()) - 1;
    }
};

} // namespace

RoadNetwork build_grid(int rows, int cols, const GridOptions& opt) {
    if (rows < 2 || cols < 2) {
        throw ConfigError("build_grid: rows and cols must both be >= 2");
    }
    GridBuilder b{rows, cols, opt, {}};

    // Interior intersections, row-major. Row index grows southward.
    std::vector<std::vector<int>> inter(rows, std::vector<int>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            inter[r][c] = b.add_node("i" + std::to_string(r) + "_" + std::to_string(c),
                                     NodeKind::Signalized);
        }
    }
    std::vector<int> north(cols), south(cols), west(rows), east(rows);
    for (int c = 0; c < cols; ++c) {
        north[c] = b.add_node("north_" + std::to_string(c), NodeKind::Boundary);
        south[c] = b.add_node("south_" + std::to_string(c), NodeKind::Boundary);
    }
    for (int r = 0; r < rows; ++r) {
        west[r] = b.add_node("west_" + std::to_string(r), NodeKind::Boundary);
        east[r] = b.add_node("east_" + std::to_string(r), NodeKind::Boundary);
    }
    const int corner_nw = b.add_node("corner_nw", NodeKind::Boundary);
    const int corner_ne = b.add_node("corner_ne", NodeKind::Boundary);
    const int corner_sw = b.add_node("corner_sw", NodeKind::Boundary);
    const int corner_se = b.add_node("corner_se", NodeKind::Boundary);

    // Direction codes: 0=N, 1=S, 2=W, 3=E (side of the intersection).
    // in_by_side[node side] = link entering the intersection from that side.
    std::vector<std::array<int, 4>> in_by_side(b.net.nodes.size(), {-1, -1, -1, -1});
    std::vector<std::array<int, 4>> out_by_side(b.net.nodes.size(), {-1, -1, -1, -1});

    auto connect = [&](int a, int bnode, int side_at_a) {
        // bidirectional pair between intersection `a` and neighbor `bnode`
        const int out = b.add_link(a, bnode);
        const int in = b.add_link(bnode, a);
        out_by_side[a][side_at_a] = out;
        in_by_side[a][side_at_a] = in;
        return std::pair{in, out};
    };

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int n = inter[r][c];
            // north side
            if (r == 0) {
                connect(n, north[c], 0);
            } else {
                const auto [in, out] = connect(n, inter[r - 1][c], 0);
                in_by_side[inter[r - 1][c]][1] = out;
                out_by_side[inter[r - 1][c]][1] = in;
            }
            // west side
            if (c == 0) {
                connect(n, west[r], 2);
            } else {
                const auto [in, out] = connect(n, inter[r][c - 1], 2);
                in_by_side[inter[r][c - 1]][3] = out;
                out_by_side[inter[r][c - 1]][3] = in;
            }
            if (r == rows - 1) connect(n, south[c], 1);
            if (c == cols - 1) connect(n, east[r], 3);
        }
    }

    // Corner sinks: one inbound link from the nearest corner intersection.
    std::vector<std::pair<int, int>> corner_feed = {
        {inter[0][0], corner_nw},
        {inter[0][cols - 1], corner_ne},
        {inter[rows - 1][0], corner_sw},
        {inter[rows - 1][cols - 1], corner_se},
    };
    std::map<int, int> corner_exit;  // intersection -> exit link
    for (auto [from, corner] : corner_feed) {
        corner_exit[from] = b.add_link(from, corner);
    }

    // Movements and phases. Approach headings by entry side:
    //   from south side -> northbound, from north -> southbound,
    //   from east -> westbound, from west -> eastbound.
    // through/left/right targets per heading, as (exit side):
    //   NB: through=N, left=W, right=E;  SB: through=S, left=E, right=W
    //   WB: through=W, left=S, right=N;  EB: through=E, left=N, right=S
    struct Heading { int entry_side; int through, left, right; };
    const std::array<Heading, 4> headings = {{
        {1, 0, 2, 3},  // northbound enters from the south side
        {0, 1, 3, 2},  // southbound
        {3, 2, 1, 0},  // westbound
        {2, 3, 0, 1},  // eastbound
    }};

    b.net.phases.resize(b.net.nodes.size());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int n = inter[r][c];
            auto& node_phases = b.net.phases[n];
            for (const Heading& h : headings) {
                const int in = in_by_side[n][h.entry_side];
                Phase phase;
                auto add = [&](int exit_side, TurnKind t) {
                    const int out = out_by_side[n][exit_side];
                    if (out >= 0) phase.movements.push_back(b.add_movement(in, out, t));
                };
                add(h.left, TurnKind::Left);
                add(h.through, TurnKind::Through);
                add(h.right, TurnKind::Right);
                if (auto it = corner_exit.find(n); it != corner_exit.end()) {
                    phase.movements.push_back(b.add_movement(in, it->second, TurnKind::Right));
                }
                node_phases.push_back(std::move(phase));
            }
        }
    }

    b.net.finalize();
    return b.net;
}

// --- JSON schema ----------------------------------------------------------

RoadNetwork network_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("network: invalid JSON: ") + e.what());
    }
    try {
        if (j.value("schema", "") != kNetworkSchema) {
            throw VersionError("network: expected schema '" + std::string(kNetworkSchema) +
                               "', got '" + j.value("schema", "") + "'");
        }
        RoadNetwork net;
        for (const auto& jn : j.at("nodes")) {
            net.nodes.push_back({jn.at("id").get<std::string>(),
                                 kind_from(jn.at("kind").get<std::string>(), "nodes")});
        }
        std::map<std::string, int> node_ix;
        for (std::size_t i = 0; i < net.nodes.size(); ++i) node_ix[net.nodes[i].id] = static_cast<int>(i);
        auto need_node = [&](const std::string& id, const std::string& where) {
            auto it = node_ix.find(id);
            if (it == node_ix.end()) throw ValidationError(where + ": unknown node '" + id + "'");
            return it->second;
        };
        for (const auto& jl : j.at("links")) {
            Link l;
            l.id = jl.at("id").get<std::string>();
            l.from = need_node(jl.at("from").get<std::string>(), "links['" + l.id + "']");
            l.to = need_node(jl.at("to").get<std::string>(), "links['" + l.id + "']");
            l.length_ft = jl.at("length_ft").get<double>();
            l.lanes = jl.at("lanes").get<int>();
            l.free_flow_speed_fps = jl.value("free_flow_speed_fps", 73.3333333333);
            l.saturation_flow_vps = jl.value("saturation_flow_vps", 0.5);
            net.links.push_back(l);
        }
        std::map<std::string, int> link_ix;
        for (std::size_t i = 0; i < net.links.size(); ++i) link_ix[net.links[i].id] = static_cast<int>(i);
        auto need_link = [&](const std::string& id, const std::string& where) {
            auto it = link_ix.find(id);
            if (it == link_ix.end()) throw ValidationError(where + ": unknown link '" + id + "'");
            return it->second;
        };
        std::map<std::string, int> movement_ix;
        for (const auto& jm : j.at("movements")) {
            Movement m;
            m.id = jm.at("id").get<std::string>();
            m.from_link = need_link(jm.at("from_link").get<std::string>(), "movements['" + m.id + "']");
            m.to_link = need_link(jm.at("to_link").get<std::string>(), "movements['" + m.id + "']");
            m.turn = turn_from(jm.at("turn").get<std::string>(), "movements['" + m.id + "']");
            movement_ix[m.id] = static_cast<int>(net.movements.size());
            net.movements.push_back(m);
        }
        net.phases.resize(net.nodes.size());
        for (const auto& jp : j.at("phases")) {
            const int n = need_node(jp.at("node").get<std::string>(), "phases");
            for (const auto& jphase : jp.at("phases")) {
                Phase ph;
                for (const auto& mid : jphase.at("movements")) {
                    auto it = movement_ix.find(mid.get<std::string>());
                    if (it == movement_ix.end()) {
                        throw ValidationError("phases['" + net.nodes[n].id +
                                              "']: unknown movement '" + mid.get<std::string>() + "'");
                    }
                    ph.movements.push_back(it->second);
                }
                net.phases[n].push_back(std::move(ph));
            }
        }
        net.finalize();
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("network: schema violation: ") + e.what());
    }
}

RoadNetwork load_network(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("network: cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return network_from_json_text(ss.str());
}

std::string network_to_json_text(const RoadNetwork& net) {
    nlohmann::json j;
    j["schema"] = kNetworkSchema;
    j["nodes"] = nlohmann::json::array();
    for (const Node& n : net.nodes) {
        j["nodes"].push_back({{"id", n.id}, {"kind", kind_name(n.kind)}});
    }
    j["links"] = nlohmann::json::array();
    for (const Link& l : net.links) {
        j["links"].push_back({{"id", l.id},
                              {"from", net.nodes[l.from].id},
                              {"to", net.nodes[l.to].id},
                              {"length_ft", l.length_ft},
                              {"lanes", l.lanes},
                              {"free_flow_speed_fps", l.free_flow_speed_fps},
                              {"saturation_flow_vps", l.saturation_flow_vps}});
    }
    j["movements"] = nlohmann::json::array();
    for (const Movement& m : net.movements) {
        j["movements"].push_back({{"id", m.id},
                                  {"from_link", net.links[m.from_link].id},
                                  {"to_link", net.links[m.to_link].id},
                                  {"turn", turn_name(m.turn)}});
    }
    j["phases"] = nlohmann::json::array();
    for (std::size_t n = 0; n < net.nodes.size(); ++n) {
        if (net.phases[n].empty()) continue;
        nlohmann::json jn;
        jn["node"] = net.nodes[n].id;
        jn["phases"] = nlohmann::json::array();
        for (const Phase& p : net.phases[n]) {
            nlohmann::json jp;
            jp["movements"] = nlohmann::json::array();
            for (int m : p.movements) jp["movements"].push_back(net.movements[m].id);
            jn["phases"].push_back(jp);
        }
        j["phases"].push_back(jn);
    }
    return j.dump(2);
}

void save_network(const RoadNetwork& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("network: cannot open for write '" + path + "'");
    os << network_to_json_text(net) << "\n";
}

} // namespace ksddpg
