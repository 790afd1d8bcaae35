#pragma once

#include <vector>

#include "ksddpg/network.hpp"
#include "ksddpg/simulation.hpp"

namespace ksddpg {

/// pressure(phase) = sum over served movements of (upstream - downstream queue).
/// Ties break toward the lowest phase index.
int select_max_pressure_phase(const std::vector<Phase>& phases,
                              const std::vector<double>& upstream_by_movement,
                              const std::vector<double>& downstream_by_movement);

double phase_pressure(const Simulation& sim, int node, int phase);

/// Greedy pressure-maximizing phase for a live simulation state.
int max_pressure_select(const Simulation& sim, int node);

} // namespace ksddpg
