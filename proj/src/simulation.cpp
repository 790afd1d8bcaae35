#include "ksddpg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "ksddpg/errors.hpp"

namespace ksddpg {

void DemandSpec::validate(const RoadNetwork& net) const {
    for (const Flow& f : flows) {
        if (f.origin < 0 || f.origin >= static_cast<int>(net.nodes.size()) || f.destination < 0 ||
            f.destination >= static_cast<int>(net.nodes.size())) {
            throw ConfigError("demand: flow references unknown node");
        }
        if (f.rate_veh_h < 0.0) throw ConfigError("demand: negative rate");
        if (!(f.start_s < f.end_s)) throw ConfigError("demand: start must precede end");
    }
}

std::vector<int> shortest_route(const RoadNetwork& net, int origin, int destination) {
    // Edge-based Dijkstra (state = link) so declared movements act as turn
    // restrictions. Deterministic: ties resolved by link index in the heap.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(net.links.size(), inf);
    std::vector<int> prev(net.links.size(), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (int l : net.out_links[origin]) {
        dist[l] = net.links[l].free_flow_time_s();
        heap.push({dist[l], l});
    }
    int goal = -1;
    while (!heap.empty()) {
        auto [d, l] = heap.top();
        heap.pop();
        if (d > dist[l]) continue;
        if (net.links[l].to == destination) {
            goal = l;
            break;
        }
        for (int m : net.movements_from_link[l]) {
            const int nl = net.movements[m].to_link;
            const double nd = d + net.links[nl].free_flow_time_s();
            if (nd < dist[nl]) {
                dist[nl] = nd;
                prev[nl] = l;
                heap.push({nd, nl});
            }
        }
    }
    if (goal < 0) return {};
    std::vector<int> route;
    for (int l = goal; l >= 0; l = prev[l]) route.push_back(l);
    std::reverse(route.begin(), route.end());
    return route;
}

double compute_reward(double prev_delay_avg, double cur_delay_avg) {
    return prev_delay_avg - cur_delay_avg;
}

Simulation::Simulation(const RoadNetwork& net, DemandSpec demand, std::uint64_t seed,
                       VolumeMode volume_mode)
    : net_(&net),
      demand_(std::move(demand)),
      volume_mode_(volume_mode),
      arrivals_rng_(make_rng(seed)) {
    demand_.validate(net);
    link_state_.resize(net.links.size());
    backlog_.resize(net.links.size());
    credit_.assign(net.movements.size(), 0.0);
    node_queued_time_.assign(net.nodes.size(), 0.0);
    node_served_.assign(net.nodes.size(), 0);
    node_stops_.assign(net.nodes.size(), 0);
    routes_.reserve(demand_.flows.size());
    for (const Flow& f : demand_.flows) {
        std::vector<int> route = shortest_route(net, f.origin, f.destination);
        if (route.empty()) {
            throw ConfigError("demand: destination '" + net.nodes[f.destination].id +
                              "' unreachable from '" + net.nodes[f.origin].id + "'");
        }
        routes_.push_back(std::move(route));
    }
}

std::uint64_t Simulation::in_network_total() const {
    // Counted physically (backlog plus link occupancy), not derived from
    // spawned - exited, so conservation is a real structural check.
    std::uint64_t total = backlog_count_;
    for (const LinkState& ls : link_state_) total += ls.occupancy();
    return total;
}

std::uint64_t Simulation::push_vehicle(int origin, int destination) {
    std::vector<int> route = shortest_route(*net_, origin, destination);
    if (route.empty()) {
        throw ConfigError("push_vehicle: destination unreachable");
    }
    Vehicle v;
    v.id = vehicles_.size();
    v.route = std::move(route);
    v.spawn_tick = tick_;
    backlog_[v.route.front()].push_back(v.id);
    vehicles_.push_back(std::move(v));
    ++spawned_;
    ++backlog_count_;
    return vehicles_.back().id;
}

std::vector<std::uint64_t> Simulation::queue_snapshot(int link) const {
    return {link_state_[link].queue.begin(), link_state_[link].queue.end()};
}

void Simulation::spawn(int tick) {
    for (std::size_t fi = 0; fi < demand_.flows.size(); ++fi) {
        const Flow& f = demand_.flows[fi];
        if (tick < f.start_s || tick >= f.end_s) continue;
        const int n = poisson_draw(arrivals_rng_, f.rate_veh_h / 3600.0);
        for (int i = 0; i < n; ++i) {
            Vehicle v;
            v.id = vehicles_.size();
            v.route = routes_[fi];
            v.spawn_tick = tick;
            backlog_[v.route.front()].push_back(v.id);
            vehicles_.push_back(std::move(v));
            ++spawned_;
            ++backlog_count_;
        }
    }
}

void Simulation::admit_backlog() {
    for (std::size_t l = 0; l < backlog_.size(); ++l) {
        auto& pending = backlog_[l];
        while (!pending.empty()) {
            if (link_state_[l].occupancy() >= net_->links[l].jam_capacity()) break;
            Vehicle& v = vehicles_[pending.front()];
            link_state_[l].pipe.push_back(
                {v.id, static_cast<double>(tick_) + net_->links[l].free_flow_time_s()});
            v.state = VehicleState::Running;
            pending.pop_front();
            --backlog_count_;
        }
    }
}

void Simulation::advance_pipes(int tick) {
    for (std::size_t l = 0; l < link_state_.size(); ++l) {
        LinkState& ls = link_state_[l];
        while (!ls.pipe.empty() && ls.pipe.front().ready_s <= static_cast<double>(tick)) {
            Vehicle& v = vehicles_[ls.pipe.front().vehicle];
            ls.pipe.pop_front();
            if (v.route_pos + 1 == static_cast<int>(v.route.size())) {
                // Last link: the downstream boundary absorbs the vehicle directly.
                v.state = VehicleState::Exited;
                v.exit_tick = tick;
                ++exited_;
            } else {
                ls.queue.push_back(v.id);
                v.queue_join_tick = tick;
                v.current_link_queued_s = 0.0;
            }
        }
    }
}

bool Simulation::try_discharge_front(int link, int tick, const std::vector<char>* served_mask,
                                     std::vector<double>* want) {
    LinkState& ls = link_state_[link];
    if (ls.queue.empty()) return false;
    Vehicle& v = vehicles_[ls.queue.front()];
    const int next = v.route[v.route_pos + 1];
    const int m = net_->movement_between(link, next);
    if (served_mask) {
        if (m < 0 || !(*served_mask)[m]) return false;
        if ((*want)[m] < 1.0) return false;
    }
    if (link_state_[next].occupancy() >= net_->links[next].jam_capacity()) return false;

    ls.queue.pop_front();
    if (want) (*want)[m] -= 1.0;
    v.route_pos += 1;
    v.state = VehicleState::Running;
    v.current_link_queued_s = 0.0;
    v.queue_join_tick = -1;
    link_state_[next].pipe.push_back(
        {v.id, static_cast<double>(tick) + net_->links[next].free_flow_time_s()});
    const int node = net_->links[link].to;
    node_served_[node] += 1;
    return true;
}

void Simulation::discharge(const std::vector<SignalState>& signals, int tick) {
    if (signals.size() != net_->signalized.size()) {
        throw UsageError("sim_step: need one signal state per signalized node");
    }
    std::vector<char> served(net_->movements.size(), 0);
    std::vector<double> want(net_->movements.size(), 0.0);

    for (std::size_t si = 0; si < net_->signalized.size(); ++si) {
        const SignalState& sig = signals[si];
        if (sig.mode != SignalState::Mode::Green) continue;
        const int node = net_->signalized[si];
        if (sig.phase < 0 || sig.phase >= net_->phase_count(node)) {
            throw UsageError("sim_step: phase out of range for node " + net_->nodes[node].id);
        }
        for (int m : net_->phases[node][sig.phase].movements) {
            served[m] = 1;
            const Link& from = net_->links[net_->movements[m].from_link];
            credit_[m] += from.saturation_flow_vps * from.lanes;
            want[m] = std::floor(credit_[m] + 0.5);
        }
    }

    // Signalized nodes in agent order, then per entrance link strict FIFO:
    // scanning a link stops at the first vehicle that cannot move.
    for (int node : net_->signalized) {
        for (int link : net_->in_links[node]) {
            while (try_discharge_front(link, tick, &served, &want)) {
            }
        }
    }
    for (std::size_t m = 0; m < credit_.size(); ++m) {
        if (!served[m]) continue;
        const double base = std::floor(credit_[m] + 0.5);
        credit_[m] -= (base - want[m]);          // subtract what was actually taken
        credit_[m] = std::min(credit_[m], 0.5);  // unused green does not bank beyond one rounding
    }

    // Stop-sign nodes: one vehicle per approach per tick, rotating start order.
    for (int node : net_->unsignalized) {
        const auto& approaches = net_->in_links[node];
        if (approaches.empty()) continue;
        const std::size_t start = static_cast<std::size_t>(tick) % approaches.size();
        for (std::size_t i = 0; i < approaches.size(); ++i) {
            const int link = approaches[(start + i) % approaches.size()];
            try_discharge_front(link, tick, nullptr, nullptr);
        }
    }
}

void Simulation::settle_queues(int tick) {
    for (std::size_t l = 0; l < link_state_.size(); ++l) {
        const int node = net_->links[l].to;
        for (std::uint64_t vid : link_state_[l].queue) {
            Vehicle& v = vehicles_[vid];
            if (v.queue_join_tick == tick && v.state == VehicleState::Running) {
                v.state = VehicleState::Queued;
                v.stop_count += 1;
                ++stops_;
                node_stops_[node] += 1;
            }
            v.total_queued_s += 1.0;
            v.current_link_queued_s += 1.0;
            node_queued_time_[node] += 1.0;
        }
    }
    for (std::size_t l = 0; l < backlog_.size(); ++l) {
        const int node = net_->links[l].to;
        for (std::uint64_t vid : backlog_[l]) {
            Vehicle& v = vehicles_[vid];
            v.total_queued_s += 1.0;
            v.current_link_queued_s += 1.0;
            node_queued_time_[node] += 1.0;
        }
    }
}

double Simulation::intersection_delay_avg(int node) const {
    double total = 0.0;
    int count = 0;
    for (int l : net_->in_links[node]) {
        const LinkState& ls = link_state_[l];
        for (const auto& pe : ls.pipe) {
            total += vehicles_[pe.vehicle].current_link_queued_s;
            ++count;
        }
        for (std::uint64_t vid : ls.queue) {
            total += vehicles_[vid].current_link_queued_s;
            ++count;
        }
        for (std::uint64_t vid : backlog_[l]) {
            total += vehicles_[vid].current_link_queued_s;
            ++count;
        }
    }
    return count ? total / count : 0.0;
}

int Simulation::queued_on_link(int link) const {
    return static_cast<int>(link_state_[link].queue.size() + backlog_[link].size());
}

int Simulation::queued_for_movement(int from_link, int to_link) const {
    int n = 0;
    for (std::uint64_t vid : link_state_[from_link].queue) {
        const Vehicle& v = vehicles_[vid];
        if (v.route[v.route_pos + 1] == to_link) ++n;
    }
    for (std::uint64_t vid : backlog_[from_link]) {
        const Vehicle& v = vehicles_[vid];
        if (v.route.size() > 1 && v.route[1] == to_link) ++n;
    }
    return n;
}

int Simulation::observation_dim(int node) const {
    return net_->entrance_lane_count(node) + net_->phase_count(node);
}

Matrix Simulation::observe(int node, int display_phase) const {
    Matrix obs(1, observation_dim(node));
    std::size_t at = 0;
    for (int l : net_->in_links[node]) {
        const LinkState& ls = link_state_[l];
        const double backlog = static_cast<double>(backlog_[l].size());
        const double count = volume_mode_ == VolumeMode::QueuedOnly
                                 ? ls.queue.size() + backlog
                                 : ls.occupancy() + backlog;
        const double norm = std::min(1.0, count / net_->links[l].jam_capacity());
        for (int lane = 0; lane < net_->links[l].lanes; ++lane) obs(0, at++) = norm;
    }
    for (int p = 0; p < net_->phase_count(node); ++p) {
        obs(0, at++) = (p == display_phase) ? 1.0 : 0.0;
    }
    return obs;
}

MetricsFrame Simulation::make_frame(int tick) const {
    MetricsFrame f;
    f.t = tick;
    f.nodes.reserve(net_->signalized.size());
    for (int node : net_->signalized) {
        NodeFrame nf;
        nf.node = node;
        double speed = 0.0;
        int count = 0;
        for (int l : net_->in_links[node]) {
            const LinkState& ls = link_state_[l];
            nf.queue_veh += static_cast<int>(ls.queue.size() + backlog_[l].size());
            speed += net_->links[l].free_flow_speed_fps * static_cast<double>(ls.pipe.size());
            count += ls.occupancy() + static_cast<int>(backlog_[l].size());
        }
        nf.delay_avg_s = intersection_delay_avg(node);
        nf.speed_fps = count ? speed / count : 0.0;
        nf.stops_cum = node_stops_[node];
        f.nodes.push_back(nf);
    }
    double speed = 0.0;
    double delay = 0.0;
    int on_links = 0;
    for (std::size_t l = 0; l < link_state_.size(); ++l) {
        const LinkState& ls = link_state_[l];
        f.total_queued += static_cast<int>(ls.queue.size() + backlog_[l].size());
        speed += net_->links[l].free_flow_speed_fps * static_cast<double>(ls.pipe.size());
        for (std::uint64_t vid : ls.queue) delay += vehicles_[vid].current_link_queued_s;
        for (const auto& pe : ls.pipe) delay += vehicles_[pe.vehicle].current_link_queued_s;
        for (std::uint64_t vid : backlog_[l]) delay += vehicles_[vid].current_link_queued_s;
        on_links += ls.occupancy() + static_cast<int>(backlog_[l].size());
    }
    f.mean_speed_fps = on_links ? speed / on_links : 0.0;
    f.net_delay_avg_s = on_links ? delay / on_links : 0.0;
    f.stops_cum = stops_;
    f.spawned = spawned_;
    f.exited = exited_;
    f.in_network = in_network_total();
    return f;
}

MetricsFrame Simulation::step(const std::vector<SignalState>& signals) {
    const int tick = tick_;
    spawn(tick);
    admit_backlog();
    advance_pipes(tick);
    discharge(signals, tick);
    settle_queues(tick);
    MetricsFrame f = make_frame(tick);
    tick_ += 1;
    return f;
}

} // namespace ksddpg
