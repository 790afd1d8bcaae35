#include "ksddpg/controller.hpp"

#include <algorithm>

#include "ksddpg/errors.hpp"

namespace ksddpg {

void ControllerConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw ConfigError(std::string("controller: ") + name + " must be positive");
    };
    positive(green_extension_s, "green_extension_s");
    positive(min_green_through_s, "min_green_through_s");
    positive(min_green_left_s, "min_green_left_s");
    positive(yellow_s, "yellow_s");
    positive(red_clearance_s, "red_clearance_s");
    if (min_green_through_s > max_green_through_s || min_green_left_s > max_green_left_s) {
        throw ConfigError("controller: min green exceeds max green");
    }
    if (cycle_min_s <= 0 || cycle_min_s > cycle_max_s) {
        throw ConfigError("controller: bad cycle bounds");
    }
}

const char* mode_name(SignalMode m) {
    switch (m) {
        case SignalMode::Green: return "green";
        case SignalMode::Yellow: return "yellow";
        case SignalMode::RedClearance: return "red";
    }
    return "?";
}

PhaseController::PhaseController(int phase_count, std::vector<bool> left_only,
                                 ControllerConfig cfg)
    : phase_count_(phase_count), left_only_(std::move(left_only)), cfg_(cfg) {
    cfg_.validate();
    if (phase_count_ < 2) throw ConfigError("controller: need at least 2 phases");
    if (left_only_.size() != static_cast<std::size_t>(phase_count_)) {
        throw ConfigError("controller: left_only flags must match phase count");
    }
    served_.assign(phase_count_, false);
    served_[0] = true;
    decision_countdown_ = min_green(0);
}

int PhaseController::min_green(int phase) const {
    return left_only_[phase] ? cfg_.min_green_left_s : cfg_.min_green_through_s;
}

int PhaseController::max_green(int phase) const {
    return left_only_[phase] ? cfg_.max_green_left_s : cfg_.max_green_through_s;
}

int PhaseController::displayed_phase() const {
    return mode_ == SignalMode::Green ? current_ : target_;
}

SignalState PhaseController::signal() const {
    SignalState s;
    s.phase = displayed_phase();
    switch (mode_) {
        case SignalMode::Green: s.mode = SignalState::Mode::Green; break;
        case SignalMode::Yellow: s.mode = SignalState::Mode::Yellow; break;
        case SignalMode::RedClearance: s.mode = SignalState::Mode::AllRed; break;
    }
    return s;
}

bool PhaseController::all_served() const {
    return std::all_of(served_.begin(), served_.end(), [](bool b) { return b; });
}

void PhaseController::complete_cycle() {
    completed_cycles_.push_back(cycle_elapsed_);
    cycle_elapsed_ = 0;
    served_.assign(phase_count_, false);
    if (mode_ == SignalMode::Green) served_[current_] = true;
}

void PhaseController::start_switch(int target) {
    mode_ = SignalMode::Yellow;
    target_ = target;
    transition_left_ = cfg_.yellow_s;
    awaiting_action_ = false;
    pending_cycle_switch_ = false;
}

void PhaseController::force_switch(int target) {
    if (mode_ != SignalMode::Green) {
        throw UsageError("force_switch: controller is mid-transition");
    }
    if (target == current_ || target < 0 || target >= phase_count_) {
        throw UsageError("force_switch: bad target phase");
    }
    start_switch(target);
}

bool PhaseController::begin_tick() {
    // Hard cycle bound: end the cycle at the maximum and rotate to the next
    // phase. The rotation waits for minimum green so safety bounds always win.
    if (cycle_elapsed_ >= cfg_.cycle_max_s) {
        complete_cycle();
        if (mode_ == SignalMode::Green) {
            if (phase_elapsed_ >= min_green(current_)) {
                start_switch((current_ + 1) % phase_count_);
            } else {
                pending_cycle_switch_ = true;
            }
        }
    } else if (all_served() && cycle_elapsed_ >= cfg_.cycle_min_s) {
        complete_cycle();
    }

    if (pending_cycle_switch_ && mode_ == SignalMode::Green &&
        phase_elapsed_ >= min_green(current_)) {
        start_switch((current_ + 1) % phase_count_);
    }

    if (mode_ != SignalMode::Green) return false;

    if (decision_countdown_ == 0) {
        // Fallback when the pending decision went unanswered: the green grows a
        // second per silent tick, and rotates automatically at max green.
        if (awaiting_action_ && phase_elapsed_ >= max_green(current_)) {
            start_switch((current_ + 1) % phase_count_);
            return false;
        }
        awaiting_action_ = true;
        return true;
    }
    return false;
}

std::vector<Action> PhaseController::legal_actions() const {
    if (mode_ != SignalMode::Green || !awaiting_action_) {
        throw UsageError("legal_actions: not at a decision point");
    }
    std::vector<Action> out;
    const int unit = cfg_.green_extension_s;
    if (phase_elapsed_ + unit <= max_green(current_) &&
        cycle_elapsed_ + unit <= cfg_.cycle_max_s) {
        out.push_back(Action::extend());
    }
    for (int p = 0; p < phase_count_; ++p) {
        if (p != current_) out.push_back(Action::switch_to(p));
    }
    return out;
}

void PhaseController::apply(const Action& action) {
    if (!awaiting_action_) {
        throw UsageError("apply_action: no decision point is pending");
    }
    if (action.kind == Action::Kind::Extend) {
        const int unit = cfg_.green_extension_s;
        if (phase_elapsed_ + unit > max_green(current_)) {
            throw UsageError("apply_action: extend rejected, violates max_green");
        }
        if (cycle_elapsed_ + unit > cfg_.cycle_max_s) {
            throw UsageError("apply_action: extend rejected, violates cycle_max");
        }
        decision_countdown_ = unit;
        awaiting_action_ = false;
        return;
    }
    if (action.target == current_) {
        throw UsageError("apply_action: switch rejected, violates switch_to_current");
    }
    if (action.target < 0 || action.target >= phase_count_) {
        throw UsageError("apply_action: switch rejected, unknown target phase");
    }
    start_switch(action.target);
}

void PhaseController::finish_tick() {
    cycle_elapsed_ += 1;
    switch (mode_) {
        case SignalMode::Green:
            phase_elapsed_ += 1;
            if (decision_countdown_ > 0) decision_countdown_ -= 1;
            break;
        case SignalMode::Yellow:
            transition_left_ -= 1;
            if (transition_left_ == 0) {
                mode_ = SignalMode::RedClearance;
                transition_left_ = cfg_.red_clearance_s;
            }
            break;
        case SignalMode::RedClearance:
            transition_left_ -= 1;
            if (transition_left_ == 0) {
                mode_ = SignalMode::Green;
                current_ = target_;
                target_ = -1;
                phase_elapsed_ = 0;
                decision_countdown_ = min_green(current_);
                served_[current_] = true;
            }
            break;
    }
}

} // namespace ksddpg
