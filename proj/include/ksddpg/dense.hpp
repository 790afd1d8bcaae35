#pragma once

#include "ksddpg/matrix.hpp"
#include "ksddpg/rng.hpp"

namespace ksddpg {

enum class Activation { Identity, Relu, Sigmoid, Tanh };

/// One affine map: y = act(x * weight + bias), weight in R^{in x out}, bias 1 x out.
struct DenseParams {
    Matrix weight;
    Matrix bias;

    std::size_t in_dim() const { return weight.rows(); }
    std::size_t out_dim() const { return weight.cols(); }
};

/// Glorot-uniform init: entries ~ U(-sqrt(6/(fan_in+fan_out)), +...), bias zero.
DenseParams glorot_dense(std::size_t in, std::size_t out, Rng& rng);

/// Forward-pass state needed by dense_backward. One cache per forward call.
struct DenseCache {
    Matrix input;
    Matrix pre_activation;
    Activation activation = Activation::Identity;
    bool valid = false;
};

struct DenseGrads {
    Matrix input;
    Matrix weight;
    Matrix bias;
};

double apply_activation(Activation act, double x);
/// Derivative of the activation expressed through pre-activation value z.
double activation_grad(Activation act, double z);

/// y = act(x*W + b). `x` is 1 x in. Fills `cache` (if given) for the backward pass.
Matrix dense_forward(const Matrix& x, const DenseParams& p, Activation act,
                     DenseCache* cache = nullptr);

/// Chain-rule gradients for input, weight and bias. Requires the cache produced
/// by the matching dense_forward call; a reused or default cache is a usage error.
DenseGrads dense_backward(const Matrix& grad_out, DenseCache& cache, const DenseParams& p);

} // namespace ksddpg
