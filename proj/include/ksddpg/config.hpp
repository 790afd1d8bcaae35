#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksddpg/controller.hpp"
#include "ksddpg/learners.hpp"
#include "ksddpg/network.hpp"
#include "ksddpg/simulation.hpp"

namespace ksddpg {

inline constexpr const char* kConfigSchema = "ksddpg-exp-1";

/// Demand as written in config files: node ids, rates in veh/h.
struct FlowSpec {
    std::string from, to;
    double rate_veh_h = 0.0;
    double start_s = 0.0;
    double end_s = 3600.0;
};

/// Declarative experiment description. Presets expand against the network:
///   uniform:     `rate_veh_h` total, split evenly over every through stream
///                (both directions of every grid street)
///   directional: `main_veh_h` total over eastbound rows, `cross_veh_h` total
///                over southbound columns
struct ExperimentConfig {
    // network: either a grid spec or a file
    bool use_grid = true;
    int grid_rows = 2, grid_cols = 2;
    GridOptions grid;
    std::string network_file;

    std::string demand_preset;  // "uniform", "directional" or "" for explicit flows
    double preset_rate_veh_h = 0.0;
    double preset_main_veh_h = 0.0;
    double preset_cross_veh_h = 0.0;
    double preset_start_s = 0.0;
    double preset_end_s = -1.0;  // default: horizon
    std::vector<FlowSpec> flows;

    std::string algorithm = "fixed_time";
    int episodes = 1;
    int horizon_s = 3600;
    std::uint64_t seed = 1;
    int eval_episodes = 1;

    LearnerHyper hyper;
    std::size_t buffer_capacity = 1000000;
    int update_every = 100;  // train trigger: one step per this many stored samples
    int train_rounds = 1;    // minibatch rounds per trigger

    ControllerConfig controller;

    std::string checkpoint;  // manifest path for eval/compare
    std::string out_dir = "out";
    bool controller_trace = false;
    bool knowledge_trace = false;
    double vc_threshold = 0.5;
    VolumeMode volume_mode = VolumeMode::QueuedPlusRunning;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);

    /// `--set key=value` CLI override (e.g. hyper.actor_lr=0.001, episodes=50).
    void apply_override(const std::string& key, const std::string& value);

    RoadNetwork build_network() const;
    DemandSpec build_demand(const RoadNetwork& net) const;
    void validate() const;
};

} // namespace ksddpg
