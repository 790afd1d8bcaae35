#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>

#include "ksddpg/controller.hpp"
#include "ksddpg/errors.hpp"
#include "ksddpg/max_pressure.hpp"
#include "ksddpg/rng.hpp"
#include "ksddpg/webster.hpp"

using namespace ksddpg;

namespace {

PhaseController make_ctrl(int phases = 4, ControllerConfig cfg = {}) {
    return PhaseController(phases, std::vector<bool>(phases, false), cfg);
}

bool has_extend(const std::vector<Action>& actions) {
    return std::any_of(actions.begin(), actions.end(),
                       [](const Action& a) { return a.kind == Action::Kind::Extend; });
}

/// Ticks the controller forward until the next decision point, applying
/// nothing. Returns seconds advanced.
int run_to_decision(PhaseController& c, int limit = 1000) {
    for (int t = 0; t < limit; ++t) {
        if (c.begin_tick()) return t;
        c.finish_tick();
    }
    return -1;
}

} // namespace

TEST_CASE("config validation") {
    ControllerConfig bad;
    bad.min_green_through_s = 80;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    ControllerConfig bad2;
    bad2.cycle_min_s = 200;
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
    CHECK_NOTHROW(ControllerConfig{}.validate());
}

TEST_CASE("first decision point lands at minimum green") {
    PhaseController c = make_ctrl();
    int waited = 0;
    while (!c.begin_tick()) {
        c.finish_tick();
        ++waited;
    }
    CHECK(waited == 15);
    CHECK(c.phase_elapsed_s() == 15);
    CHECK(c.mode() == SignalMode::Green);
}

TEST_CASE("extend moves the next decision two seconds out") {
    PhaseController c = make_ctrl();
    run_to_decision(c);
    c.apply(Action::extend());
    c.finish_tick();
    const int gap = run_to_decision(c);
    CHECK(gap == 1);  // one more finish_tick after the apply tick
    CHECK(c.phase_elapsed_s() == 17);
}

TEST_CASE("switch passes through exactly 3s yellow + 3s red clearance") {
    PhaseController c = make_ctrl();
    run_to_decision(c);
    c.apply(Action::switch_to(2));
    int yellow = 0, red = 0;
    while (c.mode() != SignalMode::Green) {
        if (c.mode() == SignalMode::Yellow) ++yellow;
        if (c.mode() == SignalMode::RedClearance) ++red;
        CHECK_FALSE(c.begin_tick());
        c.finish_tick();
    }
    CHECK(yellow == 3);
    CHECK(red == 3);
    CHECK(c.current_phase() == 2);
    CHECK(c.phase_elapsed_s() == 0);
}

TEST_CASE("legal actions at a fresh decision point") {
    PhaseController c = make_ctrl();
    run_to_decision(c);
    std::vector<Action> acts = c.legal_actions();
    CHECK(acts.size() == 4);  // Extend + 3 switches
    CHECK(has_extend(acts));
    int switches = 0;
    for (const Action& a : acts) {
        if (a.kind == Action::Kind::SwitchTo) {
            ++switches;
            CHECK(a.target != c.current_phase());
        }
    }
    CHECK(switches == 3);
}

TEST_CASE("extend is excluded once max green would be exceeded") {
    ControllerConfig cfg;
    cfg.min_green_through_s = 15;
    cfg.max_green_through_s = 15;
    PhaseController c = make_ctrl(4, cfg);
    run_to_decision(c);
    CHECK(c.phase_elapsed_s() == 15);
    std::vector<Action> acts = c.legal_actions();
    CHECK_FALSE(has_extend(acts));
    CHECK(acts.size() == 3);
}

TEST_CASE("extend is excluded when the cycle maximum would be exceeded") {
    PhaseController c = make_ctrl();

    auto extend_until = [&](int target_elapsed) {
        while (true) {
            REQUIRE(run_to_decision(c) >= 0);
            if (c.phase_elapsed_s() >= target_elapsed) return;
            c.apply(Action::extend());
            c.finish_tick();
        }
    };

    // Reach a decision at cycle_elapsed 118: green 59 + switch, then extend to 53.
    extend_until(59);
    c.apply(Action::switch_to(1));
    c.finish_tick();
    extend_until(53);
    CHECK(c.cycle_elapsed_s() == 118);
    CHECK(has_extend(c.legal_actions()));  // 118 + 2 <= 120

    // Reach a decision at cycle_elapsed 119: greens 59 and 15, then extend to 33.
    PhaseController d = make_ctrl();
    auto extend_until_d = [&](int target_elapsed) {
        while (true) {
            REQUIRE(run_to_decision(d) >= 0);
            if (d.phase_elapsed_s() >= target_elapsed) return;
            d.apply(Action::extend());
            d.finish_tick();
        }
    };
    extend_until_d(59);
    d.apply(Action::switch_to(1));
    d.finish_tick();
    extend_until_d(15);
    d.apply(Action::switch_to(2));
    d.finish_tick();
    extend_until_d(33);
    CHECK(d.cycle_elapsed_s() == 119);
    CHECK_FALSE(has_extend(d.legal_actions()));  // 119 + 2 > 120
}

TEST_CASE("illegal actions are rejected with the violated constraint") {
    PhaseController c = make_ctrl();
    CHECK_THROWS_AS(c.apply(Action::extend()), UsageError);  // not at a decision point
    CHECK_THROWS_AS(c.legal_actions(), UsageError);
    run_to_decision(c);
    CHECK_THROWS_WITH_AS(c.apply(Action::switch_to(c.current_phase())),
                         doctest::Contains("switch_to_current"), UsageError);
    ControllerConfig tight;
    tight.min_green_through_s = 15;
    tight.max_green_through_s = 15;
    PhaseController d = make_ctrl(4, tight);
    run_to_decision(d);
    CHECK_THROWS_WITH_AS(d.apply(Action::extend()), doctest::Contains("max_green"), UsageError);
}

TEST_CASE("unanswered decisions fall back to a round-robin switch at max green") {
    PhaseController c = make_ctrl();
    int green_seconds = 0;
    while (c.mode() == SignalMode::Green) {
        c.begin_tick();  // never answered
        if (c.mode() != SignalMode::Green) break;
        c.finish_tick();
        ++green_seconds;
    }
    CHECK(green_seconds == 60);  // exactly max green served
    CHECK(c.mode() == SignalMode::Yellow);
    while (c.mode() != SignalMode::Green) {
        c.begin_tick();
        c.finish_tick();
    }
    CHECK(c.current_phase() == 1);  // round-robin successor
}

TEST_CASE("random legal control keeps every safety bound for an hour") {
    ControllerConfig cfg;
    PhaseController c = make_ctrl(4, cfg);
    Rng rng = make_rng(2024);

    int green_run = 0, yellow_run = 0, red_run = 0;
    SignalMode prev = SignalMode::Green;
    int prev_green_len = -1;
    for (int t = 0; t < 3600; ++t) {
        if (c.begin_tick()) {
            std::vector<Action> acts = c.legal_actions();
            c.apply(acts[uniform_int(rng, 0, static_cast<int>(acts.size()) - 1)]);
        }
        const SignalMode m = c.mode();
        if (m == prev) {
            (m == SignalMode::Green ? green_run : m == SignalMode::Yellow ? yellow_run : red_run)++;
        } else {
            if (prev == SignalMode::Green) {
                CHECK(green_run >= cfg.min_green_through_s);
                CHECK(green_run <= cfg.max_green_through_s);
                prev_green_len = green_run;
                CHECK(m == SignalMode::Yellow);  // green never jumps straight to green/red
            }
            if (prev == SignalMode::Yellow) {
                CHECK(yellow_run == cfg.yellow_s);
                CHECK(m == SignalMode::RedClearance);
            }
            if (prev == SignalMode::RedClearance) {
                CHECK(red_run == cfg.red_clearance_s);
                CHECK(m == SignalMode::Green);
            }
            green_run = yellow_run = red_run = 1;
            prev = m;
        }
        c.finish_tick();
    }
    CHECK(prev_green_len > 0);
    for (int len : c.completed_cycles()) {
        CHECK(len >= cfg.cycle_min_s);
        CHECK(len <= cfg.cycle_max_s);
    }
    CHECK(c.completed_cycles().size() >= 20);
}

TEST_CASE("fixed plans run through the same sequencing") {
    PhaseController c = make_ctrl();
    const std::vector<FixedTimePlan::Entry> plan = {{0, 20}, {1, 16}, {2, 24}, {3, 18}};
    std::size_t slot = 0;
    std::map<int, std::vector<int>> green_lengths;
    int green_run = 0;
    SignalMode prev = SignalMode::Green;
    int prev_phase = 0;
    for (int t = 0; t < 1200; ++t) {
        c.begin_tick();
        if (c.mode() == SignalMode::Green && c.phase_elapsed_s() >= plan[slot].green_s) {
            slot = (slot + 1) % plan.size();
            c.force_switch(plan[slot].phase);
        }
        if (c.mode() == SignalMode::Green && prev != SignalMode::Green) green_run = 0;
        if (c.mode() == SignalMode::Green) {
            ++green_run;
        } else if (prev == SignalMode::Green) {
            green_lengths[prev_phase].push_back(green_run);
        }
        prev = c.mode();
        prev_phase = c.current_phase();
        c.finish_tick();
    }
    for (const auto& entry : plan) {
        REQUIRE(green_lengths.count(entry.phase));
        for (std::size_t i = 0; i < green_lengths[entry.phase].size(); ++i) {
            CHECK(green_lengths[entry.phase][i] == entry.green_s);
        }
    }
}

TEST_CASE("webster cycle formula and plan shape") {
    // 4 phases, Y=0.5, L=24 -> C = (36+5)/0.5 = 82
    CHECK(webster_cycle_s(24.0, 0.5) == doctest::Approx(82.0));

    RoadNetwork net = build_grid(2, 2);
    ControllerConfig cfg;

    SUBCASE("near-zero demand clamps the cycle up to the minimum") {
        DemandSpec d;
        d.flows.push_back({net.node_of("west_0"), net.node_of("east_0"), 1.0, 0, 3600});
        auto plans = webster_plan(net, d, cfg);
        for (auto& [node, plan] : plans) {
            CHECK(plan.cycle_s(cfg) >= cfg.cycle_min_s);
            CHECK(plan.cycle_s(cfg) <= cfg.cycle_max_s);
        }
    }
    SUBCASE("symmetric demand splits greens equally") {
        DemandSpec d;
        for (const char* o : {"west_0", "east_0"}) {
            for (const char* dst : {"east_0", "west_0"}) {
                if (std::string(o) != dst)
                    d.flows.push_back({net.node_of(o), net.node_of(dst), 400.0, 0, 3600});
            }
        }
        for (const char* o : {"north_0", "south_0"}) {
            for (const char* dst : {"south_0", "north_0"}) {
                if (std::string(o) != dst)
                    d.flows.push_back({net.node_of(o), net.node_of(dst), 400.0, 0, 3600});
            }
        }
        auto plans = webster_plan(net, d, cfg);
        const FixedTimePlan& p = plans.at(net.node_of("i0_0"));
        REQUIRE(p.entries.size() == 4);
        CHECK(p.entries[0].green_s == p.entries[1].green_s);
        CHECK(p.entries[2].green_s == p.entries[3].green_s);
        CHECK(p.entries[0].green_s == p.entries[2].green_s);
    }
    SUBCASE("saturated demand pins the cycle at maximum") {
        DemandSpec d = DemandSpec{};
        for (int r = 0; r < 2; ++r) {
            d.flows.push_back({net.node_of("west_" + std::to_string(r)),
                               net.node_of("east_" + std::to_string(r)), 1700.0, 0, 3600});
            d.flows.push_back({net.node_of("east_" + std::to_string(r)),
                               net.node_of("west_" + std::to_string(r)), 1700.0, 0, 3600});
        }
        auto plans = webster_plan(net, d, cfg);
        const FixedTimePlan& p = plans.at(net.node_of("i0_0"));
        CHECK(p.saturated);
        CHECK(p.cycle_s(cfg) <= cfg.cycle_max_s);
    }
}

TEST_CASE("webster greens stay inside green and cycle bounds on random demand") {
    RoadNetwork net = build_grid(2, 2);
    ControllerConfig cfg;
    Rng rng = make_rng(55);
    std::vector<std::string> boundary;
    for (const Node& n : net.nodes) {
        if (n.kind == NodeKind::Boundary && !net.out_links[net.node_of(n.id)].empty()) {
            boundary.push_back(n.id);
        }
    }
    for (int trial = 0; trial < 25; ++trial) {
        DemandSpec d;
        const int flows = uniform_int(rng, 1, 6);
        for (int f = 0; f < flows; ++f) {
            const int o = uniform_int(rng, 0, static_cast<int>(boundary.size()) - 1);
            int dst = o;
            while (dst == o) dst = uniform_int(rng, 0, static_cast<int>(boundary.size()) - 1);
            d.flows.push_back({net.node_of(boundary[o]), net.node_of(boundary[dst]),
                               uniform_range(rng, 0.0, 1200.0), 0, 3600});
        }
        auto plans = webster_plan(net, d, cfg);
        for (auto& [node, plan] : plans) {
            CHECK(plan.cycle_s(cfg) >= cfg.cycle_min_s);
            CHECK(plan.cycle_s(cfg) <= cfg.cycle_max_s);
            for (const auto& e : plan.entries) {
                CHECK(e.green_s >= cfg.min_green_through_s);
                CHECK(e.green_s <= cfg.max_green_through_s);
            }
        }
    }
}

TEST_CASE("max pressure selection") {
    RoadNetwork net = build_grid(2, 2);

    SUBCASE("all queues zero ties to phase 0") {
        Simulation sim(net, DemandSpec{}, 1);
        CHECK(max_pressure_select(sim, net.node_of("i0_0")) == 0);
    }
    SUBCASE("heavier upstream queue wins") {
        Simulation sim(net, DemandSpec{}, 1);
        for (int i = 0; i < 5; ++i) sim.push_vehicle(net.node_of("west_0"), net.node_of("east_0"));
        for (int i = 0; i < 2; ++i) sim.push_vehicle(net.node_of("north_0"), net.node_of("south_0"));
        for (int t = 0; t < 60; ++t) sim.step({{1, SignalState::Mode::AllRed},
                                               {1, SignalState::Mode::AllRed},
                                               {1, SignalState::Mode::AllRed},
                                               {1, SignalState::Mode::AllRed}});
        // eastbound (phase 3) carries 5 queued, southbound (phase 1) carries 2
        CHECK(max_pressure_select(sim, net.node_of("i0_0")) == 3);
    }
    SUBCASE("argmax matches exhaustive enumeration and is scale invariant") {
        Rng rng = make_rng(77);
        const int node = net.node_of("i0_0");
        const auto& phases = net.phases[node];
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> up(net.movements.size(), 0.0);
            std::vector<double> down(net.movements.size(), 0.0);
            for (const Phase& p : phases) {
                for (int m : p.movements) {
                    up[m] = uniform_int(rng, 0, 12);
                    down[m] = uniform_int(rng, 0, 12);
                }
            }
            const int got = select_max_pressure_phase(phases, up, down);
            int want = 0;
            double best = -1e300;
            for (std::size_t p = 0; p < phases.size(); ++p) {
                double pressure = 0.0;
                for (int m : phases[p].movements) pressure += up[m] - down[m];
                if (pressure > best) {
                    best = pressure;
                    want = static_cast<int>(p);
                }
            }
            CHECK(got == want);

            std::vector<double> up3 = up, down3 = down;
            for (double& v : up3) v *= 3.0;
            for (double& v : down3) v *= 3.0;
            CHECK(select_max_pressure_phase(phases, up3, down3) == got);
        }
    }
}
