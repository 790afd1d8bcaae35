#include "ksddpg/webster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ksddpg/errors.hpp"

namespace ksddpg {

int FixedTimePlan::cycle_s(const ControllerConfig& cfg) const {
    int total = 0;
    for (const Entry& e : entries) total += e.green_s + cfg.yellow_s + cfg.red_clearance_s;
    return total;
}

double webster_cycle_s(double lost_time_s, double critical_ratio_sum) {
    return (1.5 * lost_time_s + 5.0) / (1.0 - critical_ratio_sum);
}

std::vector<double> design_flows(const RoadNetwork& net, const DemandSpec& demand) {
    std::vector<double> flows(net.movements.size(), 0.0);
    for (const Flow& f : demand.flows) {
        if (f.rate_veh_h <= 0.0) continue;
        const std::vector<int> route = shortest_route(net, f.origin, f.destination);
        if (route.empty()) {
            throw ConfigError("webster: unreachable flow " + net.nodes[f.origin].id + " -> " +
                              net.nodes[f.destination].id);
        }
        for (std::size_t i = 0; i + 1 < route.size(); ++i) {
            const int m = net.movement_between(route[i], route[i + 1]);
            if (m >= 0) flows[m] += f.rate_veh_h;
        }
    }
    return flows;
}

FixedTimePlan webster_plan_for_node(const RoadNetwork& net, int node,
                                    const std::vector<double>& movement_flows,
                                    const ControllerConfig& cfg) {
    const int phase_count = net.phase_count(node);
    const double lost = static_cast<double>(phase_count * (cfg.yellow_s + cfg.red_clearance_s));

    std::vector<double> critical(phase_count, 0.0);
    for (int p = 0; p < phase_count; ++p) {
        for (int m : net.phases[node][p].movements) {
            const Link& from = net.links[net.movements[m].from_link];
            const double sat_veh_h = from.saturation_flow_vps * from.lanes * 3600.0;
            critical[p] = std::max(critical[p], movement_flows[m] / sat_veh_h);
        }
    }
    const double y_sum = std::accumulate(critical.begin(), critical.end(), 0.0);

    FixedTimePlan plan;
    double cycle;
    if (y_sum >= 0.95) {
        plan.saturated = true;  // demand at or beyond capacity, pin the longest cycle
        cycle = cfg.cycle_max_s;
    } else {
        cycle = std::clamp(webster_cycle_s(lost, y_sum), static_cast<double>(cfg.cycle_min_s),
                           static_cast<double>(cfg.cycle_max_s));
    }

    const double budget = cycle - lost;
    std::vector<int> greens(phase_count);
    for (int p = 0; p < phase_count; ++p) {
        const double share = y_sum > 0.0 ? critical[p] / y_sum : 1.0 / phase_count;
        const bool left = net.phase_is_left_only(node, p);
        const int lo = left ? cfg.min_green_left_s : cfg.min_green_through_s;
        const int hi = left ? cfg.max_green_left_s : cfg.max_green_through_s;
        greens[p] = std::clamp(static_cast<int>(std::lround(budget * share)), lo, hi);
    }

    // Clamping can push the cycle outside its bounds; trim the largest greens
    // down (never below min) or grow the smallest up (never above max).
    auto total = [&]() {
        int t = 0;
        for (int g : greens) t += g + cfg.yellow_s + cfg.red_clearance_s;
        return t;
    };
    auto bound = [&](int p, bool upper) {
        const bool left = net.phase_is_left_only(node, p);
        if (upper) return left ? cfg.max_green_left_s : cfg.max_green_through_s;
        return left ? cfg.min_green_left_s : cfg.min_green_through_s;
    };
    while (total() > cfg.cycle_max_s) {
        int pick = -1;
        for (int p = 0; p < phase_count; ++p) {
            if (greens[p] > bound(p, false) && (pick < 0 || greens[p] > greens[pick])) pick = p;
        }
        if (pick < 0) {
            throw ValidationError("webster: minimum greens of node '" + net.nodes[node].id +
                                  "' cannot fit the cycle maximum");
        }
        greens[pick] -= 1;
    }
    while (total() < cfg.cycle_min_s) {
        int pick = -1;
        for (int p = 0; p < phase_count; ++p) {
            if (greens[p] < bound(p, true) && (pick < 0 || greens[p] < greens[pick])) pick = p;
        }
        if (pick < 0) break;  // all phases at max green; cycle stays short
        greens[pick] += 1;
    }

    for (int p = 0; p < phase_count; ++p) plan.entries.push_back({p, greens[p]});
    return plan;
}

std::map<int, FixedTimePlan> webster_plan(const RoadNetwork& net, const DemandSpec& demand,
                                          const ControllerConfig& cfg) {
    const std::vector<double> flows = design_flows(net, demand);
    std::map<int, FixedTimePlan> plans;
    for (int node : net.signalized) {
        plans[node] = webster_plan_for_node(net, node, flows, cfg);
    }
    return plans;
}

} // namespace ksddpg
