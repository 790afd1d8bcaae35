#pragma once

#include <map>
#include <vector>

#include "ksddpg/controller.hpp"
#include "ksddpg/network.hpp"
#include "ksddpg/simulation.hpp"

namespace ksddpg {

/// Cyclic fixed-time plan for one intersection: phases in order with green
/// durations; every change still passes through yellow + red clearance.
struct FixedTimePlan {
    struct Entry {
        int phase = 0;
        int green_s = 0;
    };
    std::vector<Entry> entries;
    bool saturated = false;

    int cycle_s(const ControllerConfig& cfg) const;
};

/// Raw Webster optimum cycle: (1.5 L + 5) / (1 - Y), unclamped.
double webster_cycle_s(double lost_time_s, double critical_ratio_sum);

/// Per-movement design flows (veh/h) implied by routing every demand flow
/// along its static shortest path.
std::vector<double> design_flows(const RoadNetwork& net, const DemandSpec& demand);

/// Webster plan for one node given per-movement design flows.
FixedTimePlan webster_plan_for_node(const RoadNetwork& net, int node,
                                    const std::vector<double>& movement_flows,
                                    const ControllerConfig& cfg);

/// Plans for every signalized node.
std::map<int, FixedTimePlan> webster_plan(const RoadNetwork& net, const DemandSpec& demand,
                                          const ControllerConfig& cfg);

} // namespace ksddpg
