#pragma once

#include <cstdint>

#include "ksddpg/matrix.hpp"

namespace ksddpg {

/// Per-parameter Adam accumulator. m/v shapes track the parameter they optimize.
struct AdamState {
    Matrix m;
    Matrix v;
    std::uint64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam(std::size_t rows, std::size_t cols, double lr);

/// Standard Adam update with bias correction. Rejects non-finite gradients
/// before touching the parameters.
void adam_step(Matrix& params, const Matrix& grads, AdamState& state);

/// target <- tau*source + (1-tau)*target, elementwise. tau must lie in [0,1].
void soft_update(Matrix& target, const Matrix& source, double tau);

} // namespace ksddpg
