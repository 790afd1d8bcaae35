#include "ksddpg/dense.hpp"

#include <cmath>

#include "ksddpg/errors.hpp"

namespace ksddpg {

DenseParams glorot_dense(std::size_t in, std::size_t out, Rng& rng) {
    DenseParams p{Matrix(in, out), Matrix(1, out)};
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < p.weight.size(); ++i) {
        p.weight.at(i) = uniform_range(rng, -bound, bound);
    }
    return p;
}

double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

double activation_grad(Activation act, double z) {
    switch (act) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

Matrix dense_forward(const Matrix& x, const DenseParams& p, Activation act, DenseCache* cache) {
    if (x.rows() != 1 || x.cols() != p.weight.rows()) {
        throw DimensionError("dense_forward: input " + x.shape_str() + " vs weight " +
                             p.weight.shape_str());
    }
    if (p.bias.rows() != 1 || p.bias.cols() != p.weight.cols()) {
        throw DimensionError("dense_forward: bias " + p.bias.shape_str() + " vs weight " +
                             p.weight.shape_str());
    }
    Matrix z = matmul(x, p.weight);
    add_in_place(z, p.bias);
    Matrix y = z;
    for (std::size_t i = 0; i < y.size(); ++i) y.at(i) = apply_activation(act, y.at(i));
    if (cache) {
        cache->input = x;
        cache->pre_activation = std::move(z);
        cache->activation = act;
        cache->valid = true;
    }
    require_finite(y, "dense_forward");
    return y;
}

DenseGrads dense_backward(const Matrix& grad_out, DenseCache& cache, const DenseParams& p) {
    if (!cache.valid) {
        throw UsageError("dense_backward: cache missing or already consumed");
    }
    if (!grad_out.same_shape(cache.pre_activation)) {
        throw DimensionError("dense_backward: grad " + grad_out.shape_str() +
                             " vs cached pre-activation " + cache.pre_activation.shape_str());
    }
    cache.valid = false;

    Matrix dz = grad_out;
    for (std::size_t i = 0; i < dz.size(); ++i) {
        dz.at(i) *= activation_grad(cache.activation, cache.pre_activation.at(i));
    }
    DenseGrads g;
    g.input = matmul(dz, transpose(p.weight));
    g.weight = matmul(transpose(cache.input), dz);
    g.bias = dz;
    return g;
}

} // namespace ksddpg
