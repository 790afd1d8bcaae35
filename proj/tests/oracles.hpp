#pragma once

// Test-only oracles. Everything here is written against plain scalar loops on
// std::vector<double>, independent of the library's Matrix/backprop paths.

#include <cmath>
#include <functional>
#include <vector>

#include "ksddpg/matrix.hpp"
#include "ksddpg/rng.hpp"

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// y_j = act(sum_i x_i * w[i][j] + b_j), scalar loops.
inline std::vector<double> affine(const std::vector<double>& x,
                                  const std::vector<std::vector<double>>& w,
                                  const std::vector<double>& b,
                                  const std::function<double(double)>& act) {
    std::vector<double> y(b.size(), 0.0);
    for (std::size_t j = 0; j < b.size(); ++j) {
        double s = b[j];
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i][j];
        y[j] = act(s);
    }
    return y;
}

inline std::vector<std::vector<double>> to_rows(const ksddpg::Matrix& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
    return out;
}

inline std::vector<double> to_vec(const ksddpg::Matrix& row) {
    return row.values();
}

/// Relative error with an absolute floor so near-zero pairs compare absolutely.
inline double rel_err(double got, double want, double floor = 1e-8) {
    const double denom = std::max({std::abs(got), std::abs(want), floor});
    return std::abs(got - want) / denom;
}

/// Central finite difference of f around *x with step h.
inline double central_diff(double* x, const std::function<double()>& f, double h = 1e-6) {
    const double save = *x;
    *x = save + h;
    const double up = f();
    *x = save - h;
    const double down = f();
    *x = save;
    return (up - down) / (2.0 * h);
}

/// Checks every entry of `param` against finite differences of `loss`.
/// Returns the worst relative error seen.
inline double max_fd_rel_err(ksddpg::Matrix& param, const ksddpg::Matrix& analytic,
                             const std::function<double()>& loss, double h = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double fd = central_diff(&param.at(i), loss, h);
        const double got = analytic.at(i);
        if (std::abs(fd) < 1e-8 && std::abs(got) < 1e-8) continue;
        worst = std::max(worst, rel_err(got, fd));
    }
    return worst;
}

inline ksddpg::Matrix random_matrix(std::size_t r, std::size_t c, ksddpg::Rng& rng,
                                    double lo = -1.0, double hi = 1.0) {
    ksddpg::Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.at(i) = ksddpg::uniform_range(rng, lo, hi);
    return m;
}

} // namespace oracle
