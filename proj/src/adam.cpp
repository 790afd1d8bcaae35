#include "ksddpg/adam.hpp"

#include <cmath>

#include "ksddpg/errors.hpp"

namespace ksddpg {

AdamState make_adam(std::size_t rows, std::size_t cols, double lr) {
    AdamState s;
    s.m = Matrix(rows, cols);
    s.v = Matrix(rows, cols);
    s.lr = lr;
    return s;
}

void adam_step(Matrix& params, const Matrix& grads, AdamState& state) {
    require_same_shape(params, grads, "adam_step");
    require_same_shape(params, state.m, "adam_step(state)");
    if (!grads.all_finite()) {
        throw NumericError("adam_step: non-finite gradient, parameters untouched");
    }
    state.step_count += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads.at(i);
        state.m.at(i) = b1 * state.m.at(i) + (1.0 - b1) * g;
        state.v.at(i) = b2 * state.v.at(i) + (1.0 - b2) * g * g;
        const double m_hat = state.m.at(i) / corr1;
        const double v_hat = state.v.at(i) / corr2;
        params.at(i) -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    require_finite(params, "adam_step");
}

void soft_update(Matrix& target, const Matrix& source, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw ConfigError("soft_update: tau=" + std::to_string(tau) + " outside [0,1]");
    }
    require_same_shape(target, source, "soft_update");
    for (std::size_t i = 0; i < target.size(); ++i) {
        target.at(i) = tau * source.at(i) + (1.0 - tau) * target.at(i);
    }
}

} // namespace ksddpg
