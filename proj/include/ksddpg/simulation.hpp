#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "ksddpg/matrix.hpp"
#include "ksddpg/network.hpp"
#include "ksddpg/rng.hpp"

namespace ksddpg {

/// One origin->destination Poisson stream, active on [start_s, end_s).
struct Flow {
    int origin = -1;
    int destination = -1;
    double rate_veh_h = 0.0;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct DemandSpec {
    std::vector<Flow> flows;
    void validate(const RoadNetwork& net) const;
};

/// What the simulator needs to know about one signalized node for one tick.
/// `phase` is the displayed phase (the target phase while transitioning);
/// movements discharge only when mode == Green.
struct SignalState {
    int phase = 0;
    enum class Mode { Green, Yellow, AllRed } mode = Mode::Green;
};

enum class VehicleState { Backlogged, Running, Queued, Exited };

struct Vehicle {
    std::uint64_t id = 0;
    std::vector<int> route;  // link indices, origin to destination
    int route_pos = 0;
    int spawn_tick = 0;
    int exit_tick = -1;
    VehicleState state = VehicleState::Backlogged;
    int stop_count = 0;
    double total_queued_s = 0.0;
    double current_link_queued_s = 0.0;
    int queue_join_tick = -1;
};

struct NodeFrame {
    int node = -1;
    int queue_veh = 0;          // queued vehicles on entrance links
    double delay_avg_s = 0.0;   // mean current-link queued time of entrance-lane vehicles
    double speed_fps = 0.0;     // mean speed of entrance-lane vehicles
    std::uint64_t stops_cum = 0;
};

struct MetricsFrame {
    int t = 0;
    std::vector<NodeFrame> nodes;  // signalized nodes, agent order
    int total_queued = 0;
    double net_delay_avg_s = 0.0;
    double mean_speed_fps = 0.0;
    std::uint64_t stops_cum = 0;
    std::uint64_t spawned = 0;
    std::uint64_t in_network = 0;  // backlog + on links
    std::uint64_t exited = 0;
};

enum class VolumeMode { QueuedPlusRunning, QueuedOnly };

/// Deterministic 1 s tick mesoscopic simulator. Links are free-flow pipes
/// feeding vertical queues; green movements discharge through a fractional
/// saturation-flow accumulator; stop-sign nodes round-robin one vehicle per
/// approach per tick. Identical (network, demand, seed) replays bit-identically.
class Simulation {
public:
    Simulation(const RoadNetwork& net, DemandSpec demand, std::uint64_t seed,
               VolumeMode volume_mode = VolumeMode::QueuedPlusRunning);

    /// Advances one second. `signals` is indexed like net.signalized.
    MetricsFrame step(const std::vector<SignalState>& signals);

    /// Injects one vehicle at the current tick, outside the Poisson streams.
    std::uint64_t push_vehicle(int origin, int destination);

    /// Normalized entrance-lane volumes plus a one-hot of `display_phase`.
    Matrix observe(int node, int display_phase) const;
    int observation_dim(int node) const;

    /// Mean current-link queued seconds over vehicles on the node's entrance links.
    double intersection_delay_avg(int node) const;

    /// Queued vehicles on the link, including spawned vehicles still waiting
    /// at the boundary for space on this entry link.
    int queued_on_link(int link) const;
    /// Queued vehicles on `from_link` whose next hop is `to_link` (backlog included).
    int queued_for_movement(int from_link, int to_link) const;
    /// Physical on-link queue contents front to back (FIFO order, no backlog).
    std::vector<std::uint64_t> queue_snapshot(int link) const;

    int now() const { return tick_; }
    const RoadNetwork& network() const { return *net_; }
    const Vehicle& vehicle(std::uint64_t id) const { return vehicles_[id]; }
    std::uint64_t spawned_total() const { return spawned_; }
    std::uint64_t exited_total() const { return exited_; }
    std::uint64_t in_network_total() const;
    std::uint64_t stops_total() const { return stops_; }
    double queued_time_at(int node) const { return node_queued_time_[node]; }
    std::uint64_t served_at(int node) const { return node_served_[node]; }

private:
    struct LinkState {
        struct PipeEntry {
            std::uint64_t vehicle;
            double ready_s;  // entry time + free-flow traversal time
        };
        std::deque<PipeEntry> pipe;
        std::deque<std::uint64_t> queue;
        int occupancy() const { return static_cast<int>(pipe.size() + queue.size()); }
    };

    void spawn(int tick);
    void admit_backlog();
    void advance_pipes(int tick);
    void discharge(const std::vector<SignalState>& signals, int tick);
    bool try_discharge_front(int link, int tick, const std::vector<char>* served_mask,
                             std::vector<double>* want);
    void settle_queues(int tick);
    MetricsFrame make_frame(int tick) const;

    static double reward_of(double prev_delay_avg, double cur_delay_avg);

    const RoadNetwork* net_;
    DemandSpec demand_;
    VolumeMode volume_mode_;
    Rng arrivals_rng_;
    int tick_ = 0;

    std::vector<Vehicle> vehicles_;
    std::vector<LinkState> link_state_;
    std::vector<std::deque<std::uint64_t>> backlog_;  // per entry link
    std::vector<double> credit_;                      // per movement
    std::vector<std::vector<int>> routes_;            // per flow
    std::vector<double> node_queued_time_;
    std::vector<std::uint64_t> node_served_;
    std::vector<std::uint64_t> node_stops_;
    std::uint64_t spawned_ = 0;
    std::uint64_t exited_ = 0;
    std::uint64_t stops_ = 0;
    std::uint64_t backlog_count_ = 0;
};

/// Reward at a decision point: reduction of the intersection's average delay
/// between two successive decision points (positive = delay went down).
double compute_reward(double prev_delay_avg, double cur_delay_avg);

/// Shortest free-flow-time route as link indices, empty if unreachable.
std::vector<int> shortest_route(const RoadNetwork& net, int origin, int destination);

} // namespace ksddpg
