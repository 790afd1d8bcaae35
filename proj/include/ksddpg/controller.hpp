#pragma once

#include <string>
#include <vector>

#include "ksddpg/simulation.hpp"

namespace ksddpg {

/// Timing bounds every phase change must respect. Defaults follow common
/// engineering practice: 2 s extension unit, 15/60 s through green bounds,
/// 5/25 s left-turn bounds, 3 s yellow, 3 s red clearance, 50-120 s cycles.
struct ControllerConfig {
    int green_extension_s = 2;
    int min_green_through_s = 15;
    int max_green_through_s = 60;
    int min_green_left_s = 5;
    int max_green_left_s = 25;
    int yellow_s = 3;
    int red_clearance_s = 3;
    int cycle_min_s = 50;
    int cycle_max_s = 120;

    void validate() const;
};

enum class SignalMode { Green, Yellow, RedClearance };

/// The acyclic action set: extend the current phase by one unit, or switch
/// to any other phase (passing through yellow + red clearance).
struct Action {
    enum class Kind { Extend, SwitchTo };
    Kind kind = Kind::Extend;
    int target = -1;

    static Action extend() { return {Kind::Extend, -1}; }
    static Action switch_to(int phase) { return {Kind::SwitchTo, phase}; }
    bool operator==(const Action&) const = default;
};

/// Per-intersection phase state machine. Protocol per simulated second:
///   1. begin_tick()      -> may force switches; reports a decision point
///   2. apply(action)     -> only when a decision point was reported
///   3. signal()          -> what the simulator serves this second
///   4. finish_tick()     -> advances timers
/// Decision points occur when the applicable minimum green is first met and
/// then after every extension unit. A cycle ends when all phases have been
/// served (not before the cycle minimum) or when the cycle maximum is hit,
/// which also forces a round-robin switch once minimum green allows it.
class PhaseController {
public:
    PhaseController(int phase_count, std::vector<bool> left_only, ControllerConfig cfg);

    /// True when the agent must pick an action this second.
    bool begin_tick();
    void apply(const Action& action);
    void finish_tick();

    std::vector<Action> legal_actions() const;

    SignalState signal() const;
    SignalMode mode() const { return mode_; }
    int current_phase() const { return current_; }
    int displayed_phase() const;
    int phase_elapsed_s() const { return phase_elapsed_; }
    int cycle_elapsed_s() const { return cycle_elapsed_; }
    int phase_count() const { return phase_count_; }
    int min_green(int phase) const;
    int max_green(int phase) const;
    const std::vector<int>& completed_cycles() const { return completed_cycles_; }

    /// Plan-driven switch that bypasses legal_actions but keeps the
    /// yellow + red clearance sequencing. Caller guarantees min green was met.
    void force_switch(int target);

private:
    void start_switch(int target);
    void complete_cycle();
    bool all_served() const;

    int phase_count_;
    std::vector<bool> left_only_;
    ControllerConfig cfg_;

    SignalMode mode_ = SignalMode::Green;
    int current_ = 0;
    int target_ = -1;
    int transition_left_ = 0;
    int phase_elapsed_ = 0;   // completed green seconds of the current phase
    int decision_countdown_ = 0;
    bool awaiting_action_ = false;
    int cycle_elapsed_ = 0;
    std::vector<bool> served_;
    bool pending_cycle_switch_ = false;
    std::vector<int> completed_cycles_;
};

const char* mode_name(SignalMode m);

} // namespace ksddpg
