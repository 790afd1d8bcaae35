#include "ksddpg/max_pressure.hpp"

namespace ksddpg {

int select_max_pressure_phase(const std::vector<Phase>& phases,
                              const std::vector<double>& upstream_by_movement,
                              const std::vector<double>& downstream_by_movement) {
    int best = 0;
    double best_pressure = 0.0;
    for (std::size_t p = 0; p < phases.size(); ++p) {
        double pressure = 0.0;
        for (int m : phases[p].movements) {
            pressure += upstream_by_movement[m] - downstream_by_movement[m];
        }
        if (p == 0 || pressure > best_pressure) {
            best = static_cast<int>(p);
            best_pressure = pressure;
        }
    }
    return best;
}

double phase_pressure(const Simulation& sim, int node, int phase) {
    const RoadNetwork& net = sim.network();
    double pressure = 0.0;
    for (int m : net.phases[node][phase].movements) {
        const Movement& mv = net.movements[m];
        pressure += sim.queued_for_movement(mv.from_link, mv.to_link) -
                    sim.queued_on_link(mv.to_link);
    }
    return pressure;
}

int max_pressure_select(const Simulation& sim, int node) {
    const RoadNetwork& net = sim.network();
    const std::vector<Phase>& phases = net.phases[node];
    std::vector<double> up(net.movements.size(), 0.0);
    std::vector<double> down(net.movements.size(), 0.0);
    for (const Phase& p : phases) {
        for (int m : p.movements) {
            const Movement& mv = net.movements[m];
            up[m] = sim.queued_for_movement(mv.from_link, mv.to_link);
            down[m] = sim.queued_on_link(mv.to_link);
        }
    }
    return select_max_pressure_phase(phases, up, down);
}

} // namespace ksddpg
