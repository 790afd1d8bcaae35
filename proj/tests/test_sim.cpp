#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "ksddpg/errors.hpp"
#include "ksddpg/network.hpp"
#include "ksddpg/simulation.hpp"

using namespace ksddpg;

namespace {

std::vector<SignalState> all_green(const RoadNetwork& net, int phase) {
    std::vector<SignalState> s(net.signalized.size());
    for (auto& st : s) st = {phase, SignalState::Mode::Green};
    return s;
}

DemandSpec uniform_2x2_demand(const RoadNetwork& net, double rate, double end_s = 3600) {
    DemandSpec d;
    for (int r = 0; r < 2; ++r) {
        d.flows.push_back({net.node_of("west_" + std::to_string(r)),
                           net.node_of("east_" + std::to_string(r)), rate, 0, end_s});
        d.flows.push_back({net.node_of("east_" + std::to_string(r)),
                           net.node_of("west_" + std::to_string(r)), rate, 0, end_s});
    }
    for (int c = 0; c < 2; ++c) {
        d.flows.push_back({net.node_of("north_" + std::to_string(c)),
                           net.node_of("south_" + std::to_string(c)), rate, 0, end_s});
        d.flows.push_back({net.node_of("south_" + std::to_string(c)),
                           net.node_of("north_" + std::to_string(c)), rate, 0, end_s});
    }
    return d;
}

} // namespace

TEST_CASE("grid topology counts") {
    RoadNetwork g22 = build_grid(2, 2);
    int signalized = 0, boundary = 0;
    for (const Node& n : g22.nodes) {
        if (n.kind == NodeKind::Signalized) ++signalized;
        if (n.kind == NodeKind::Boundary) ++boundary;
    }
    CHECK(signalized == 4);
    CHECK(boundary == 12);
    for (int n : g22.signalized) {
        CHECK(g22.phase_count(n) == 4);
        CHECK(g22.in_links[n].size() == 4);
    }

    RoadNetwork g10 = build_grid(10, 10);
    CHECK(g10.signalized.size() == 100);
    for (int n : g10.signalized) CHECK(g10.phase_count(n) == 4);

    CHECK_THROWS_AS(build_grid(1, 5), ConfigError);
}

TEST_CASE("network json round-trip") {
    RoadNetwork g = build_grid(2, 2);
    const std::string text = network_to_json_text(g);
    RoadNetwork back = network_from_json_text(text);
    CHECK(back.nodes.size() == g.nodes.size());
    CHECK(back.links.size() == g.links.size());
    CHECK(back.movements.size() == g.movements.size());
    CHECK(network_to_json_text(back) == text);
}

TEST_CASE("shipped grid2x2 fixture equals build_grid output") {
    RoadNetwork shipped = load_network(std::string(KSDDPG_DATA_DIR) + "/grid2x2.json");
    RoadNetwork built = build_grid(2, 2);
    CHECK(network_to_json_text(shipped) == network_to_json_text(built));
}

TEST_CASE("shipped hetero7 fixture loads with 7 controllers") {
    RoadNetwork net = load_network(std::string(KSDDPG_DATA_DIR) + "/hetero7.json");
    CHECK(net.signalized.size() == 7);
    CHECK(!net.unsignalized.empty());
    // Table-style mix: one three-phase T intersection among four-phase ones.
    std::vector<int> counts;
    for (int n : net.signalized) counts.push_back(net.phase_count(n));
    CHECK(std::count(counts.begin(), counts.end(), 3) == 1);
}

TEST_CASE("schema violations are reported") {
    CHECK_THROWS_AS(network_from_json_text("{not json"), ParseError);
    CHECK_THROWS_AS(network_from_json_text(R"({"schema":"other"})"), VersionError);

    // phase referencing an unknown movement
    const char* bad = R"({
      "schema": "ksddpg-net-1",
      "nodes": [{"id":"a","kind":"boundary"},{"id":"b","kind":"signalized"},{"id":"c","kind":"boundary"}],
      "links": [{"id":"a->b","from":"a","to":"b","length_ft":500,"lanes":1},
                 {"id":"b->c","from":"b","to":"c","length_ft":500,"lanes":1}],
      "movements": [{"id":"m0","from_link":"a->b","to_link":"b->c","turn":"through"}],
      "phases": [{"node":"b","phases":[{"movements":["m0"]},{"movements":["mX"]}]}]
    })";
    CHECK_THROWS_AS(network_from_json_text(bad), ValidationError);
}

TEST_CASE("spawn_arrivals: rate zero, poisson statistics, determinism") {
    RoadNetwork net = build_grid(2, 2);

    SUBCASE("zero rate spawns nothing") {
        DemandSpec d;
        d.flows.push_back({net.node_of("west_0"), net.node_of("east_0"), 0.0, 0, 3600});
        Simulation sim(net, d, 7);
        for (int t = 0; t < 50; ++t) sim.step(all_green(net, 0));
        CHECK(sim.spawned_total() == 0);
    }
    SUBCASE("sample mean within 3 sigma of 750/3600 per tick") {
        DemandSpec d;
        d.flows.push_back({net.node_of("west_0"), net.node_of("east_0"), 750.0, 0, 3600});
        Simulation sim(net, d, 99);
        for (int t = 0; t < 3600; ++t) sim.step(all_green(net, 3));
        const double expected = 750.0;
        const double sigma = std::sqrt(expected);
        CHECK(std::abs(static_cast<double>(sim.spawned_total()) - expected) < 3.0 * sigma);
    }
    SUBCASE("identical seeds spawn identically") {
        DemandSpec d = uniform_2x2_demand(net, 400.0);
        Simulation a(net, d, 1234), b(net, d, 1234);
        for (int t = 0; t < 200; ++t) {
            MetricsFrame fa = a.step(all_green(net, 0));
            MetricsFrame fb = b.step(all_green(net, 0));
            CHECK(fa.spawned == fb.spawned);
            CHECK(fa.total_queued == fb.total_queued);
        }
    }
    SUBCASE("unreachable destination fails at construction") {
        DemandSpec d;
        // corner sinks have no outgoing links, so they cannot be origins
        d.flows.push_back({net.node_of("corner_nw"), net.node_of("east_0"), 100.0, 0, 100});
        CHECK_THROWS_AS(Simulation(net, d, 1), ConfigError);
    }
}

TEST_CASE("free-flow vehicle arrives in exactly the free-flow time with zero delay") {
    GridOptions opt;
    opt.link_length_ft = 600.0;
    opt.free_flow_speed_fps = 60.0;  // 10 s per link, exactly
    RoadNetwork net = build_grid(2, 2, opt);
    Simulation sim(net, DemandSpec{}, 5);
    const std::uint64_t vid = sim.push_vehicle(net.node_of("west_0"), net.node_of("east_0"));
    // eastbound approach is phase index 3 everywhere on the grid
    int exit_tick = -1;
    for (int t = 0; t < 100 && exit_tick < 0; ++t) {
        sim.step(all_green(net, 3));
        if (sim.vehicle(vid).state == VehicleState::Exited) exit_tick = sim.vehicle(vid).exit_tick;
    }
    // route west_0 -> i0_0 -> i0_1 -> east_0: three links, 10 s each
    CHECK(exit_tick == 30);
    CHECK(sim.vehicle(vid).total_queued_s == 0.0);
    CHECK(sim.vehicle(vid).stop_count == 0);
}

TEST_CASE("saturation discharge uses the fractional accumulator") {
    RoadNetwork net = build_grid(2, 2);  // sat 0.5 veh/s, 1 lane
    Simulation sim(net, DemandSpec{}, 5);
    for (int i = 0; i < 5; ++i) sim.push_vehicle(net.node_of("west_0"), net.node_of("east_0"));
    const int entry = net.link_of("west_0->i0_0");
    // hold a conflicting phase until all five are queued at i0_0
    while (sim.queued_on_link(entry) < 5) sim.step(all_green(net, 0));

    // independent oracle: credit += 0.5 each green tick, discharge floor(credit + 0.5)
    double credit = 0.0;
    int expect_left = 5;
    std::vector<int> expected;
    for (int t = 0; t < 12; ++t) {
        credit += 0.5;
        int d = static_cast<int>(std::floor(credit + 0.5));
        d = std::min(d, expect_left);
        credit -= d;
        expect_left -= d;
        expected.push_back(expect_left);
    }
    CHECK(expected[0] == 4);  // one vehicle leaves on the first green second

    for (int t = 0; t < 12; ++t) {
        sim.step(all_green(net, 3));
        CHECK(sim.queued_on_link(entry) == expected[t]);
    }
}

TEST_CASE("vehicle conservation holds exactly on every tick") {
    RoadNetwork net = build_grid(2, 2);
    Simulation sim(net, uniform_2x2_demand(net, 500.0), 42);
    for (int t = 0; t < 600; ++t) {
        MetricsFrame f = sim.step(all_green(net, t / 40 % 4));
        CHECK(f.spawned == f.in_network + f.exited);
    }
    CHECK(sim.spawned_total() > 100);
}

TEST_CASE("link queues are FIFO") {
    RoadNetwork net = build_grid(2, 2);
    Simulation sim(net, uniform_2x2_demand(net, 700.0), 17);
    const int watched = net.link_of("west_0->i0_0");
    std::vector<std::uint64_t> prev;
    for (int t = 0; t < 400; ++t) {
        sim.step(all_green(net, t / 25 % 4));
        std::vector<std::uint64_t> cur = sim.queue_snapshot(watched);
        // departures come off the front only: the surviving part of the old
        // queue must appear as a prefix of the new one
        std::size_t keep = 0;
        if (!prev.empty() && !cur.empty()) {
            while (keep < prev.size() && prev[keep] != cur[0]) ++keep;
            for (std::size_t i = keep; i < prev.size(); ++i) {
                REQUIRE(i - keep < cur.size());
                CHECK(prev[i] == cur[i - keep]);
            }
        }
        prev = std::move(cur);
    }
}

TEST_CASE("per-vehicle delay is nonnegative and consistent with exit times") {
    RoadNetwork net = build_grid(2, 2);
    Simulation sim(net, uniform_2x2_demand(net, 500.0), 23);
    for (int t = 0; t < 900; ++t) sim.step(all_green(net, t / 30 % 4));
    int exited = 0;
    for (std::uint64_t id = 0; id < sim.spawned_total(); ++id) {
        const Vehicle& v = sim.vehicle(id);
        CHECK(v.total_queued_s >= 0.0);
        if (v.state == VehicleState::Exited) {
            ++exited;
            double ff = 0.0;
            for (int l : v.route) ff += net.links[l].free_flow_time_s();
            CHECK(v.exit_tick - v.spawn_tick >= static_cast<int>(std::floor(ff)));
        }
    }
    CHECK(exited > 50);
}

TEST_CASE("jam capacity holds vehicles upstream") {
    GridOptions opt;
    opt.link_length_ft = 100.0;  // jam capacity 4
    RoadNetwork net = build_grid(2, 2, opt);
    Simulation sim(net, DemandSpec{}, 3);
    for (int i = 0; i < 10; ++i) sim.push_vehicle(net.node_of("west_0"), net.node_of("east_0"));
    MetricsFrame f{};
    for (int t = 0; t < 20; ++t) f = sim.step(all_green(net, 0));  // hostile phase
    const int entry = net.link_of("west_0->i0_0");
    CHECK(sim.queued_on_link(entry) <= 4);
    CHECK(f.spawned == f.in_network + f.exited);
    CHECK(f.in_network == 10);  // nothing lost, the excess waits at the boundary
}

TEST_CASE("observe layout and normalization") {
    GridOptions opt;
    opt.link_length_ft = 750.0;  // jam capacity 30
    RoadNetwork net = build_grid(2, 2, opt);
    Simulation sim(net, DemandSpec{}, 3);
    const int node = net.node_of("i0_0");

    Matrix empty_obs = sim.observe(node, 0);
    CHECK(empty_obs.cols() == 8);  // 4 entrance lanes + 4 phases
    CHECK(empty_obs.cols() == static_cast<std::size_t>(sim.observation_dim(node)));
    for (int i = 0; i < 4; ++i) CHECK(empty_obs(0, i) == 0.0);
    CHECK(empty_obs(0, 4) == 1.0);
    CHECK(empty_obs(0, 5) == 0.0);

    for (int i = 0; i < 3; ++i) sim.push_vehicle(net.node_of("west_0"), net.node_of("east_0"));
    sim.step(all_green(net, 0));
    Matrix obs = sim.observe(node, 2);
    const auto& in = net.in_links[node];
    int slot = -1;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (net.links[in[i]].id == "west_0->i0_0") slot = static_cast<int>(i);
    }
    REQUIRE(slot >= 0);
    CHECK(obs(0, slot) == doctest::Approx(3.0 / 30.0));
    CHECK(obs(0, 4 + 2) == 1.0);
}

TEST_CASE("compute_reward follows the delay-reduction sign convention") {
    CHECK(compute_reward(5.0, 5.0) == 0.0);
    CHECK(compute_reward(10.0, 4.0) == 6.0);
    CHECK(compute_reward(4.0, 10.0) == -6.0);
}

TEST_CASE("monotone congestion: doubled demand never lowers the average queue") {
    RoadNetwork net = build_grid(2, 2);
    auto run = [&](double rate) {
        Simulation sim(net, uniform_2x2_demand(net, rate), 31);
        double queue_sum = 0.0;
        for (int t = 0; t < 1200; ++t) {
            // simple rotating plan as a fixed-time stand-in
            queue_sum += sim.step(all_green(net, t / 20 % 4)).total_queued;
        }
        return queue_sum / 1200.0;
    };
    CHECK(run(800.0) >= run(400.0));
}

TEST_CASE("empty network produces an all-zero frame") {
    RoadNetwork net = build_grid(2, 2);
    Simulation sim(net, DemandSpec{}, 1);
    MetricsFrame f = sim.step(all_green(net, 0));
    CHECK(f.total_queued == 0);
    CHECK(f.mean_speed_fps == 0.0);
    CHECK(f.spawned == 0);
    CHECK(f.stops_cum == 0);
    for (const NodeFrame& nf : f.nodes) {
        CHECK(nf.queue_veh == 0);
        CHECK(nf.delay_avg_s == 0.0);
    }
}
