#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ksddpg/adam.hpp"
#include "ksddpg/dense.hpp"

namespace ksddpg {

/// Plain multi-layer perceptron on row vectors, with explicit caches.
struct Mlp {
    std::vector<DenseParams> layers;
    std::vector<Activation> acts;

    static Mlp glorot(const std::vector<std::size_t>& dims, std::vector<Activation> acts,
                      Rng& rng);

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }

    Matrix forward(const Matrix& x, std::vector<DenseCache>* caches = nullptr) const;
    /// Backward through every layer; accumulates weight/bias grads into
    /// `grads` (same shapes as *this) and returns the gradient w.r.t. x.
    Matrix backward(const Matrix& grad_out, std::vector<DenseCache>& caches, Mlp& grads) const;

    std::vector<std::pair<std::string, Matrix*>> entries(const std::string& prefix);
    std::vector<std::pair<std::string, const Matrix*>> entries(const std::string& prefix) const;
};

Mlp zeros_like(const Mlp& like);

/// One Adam state per entry, in entry order.
struct AdamSet {
    std::vector<AdamState> states;

    void init(const std::vector<std::pair<std::string, Matrix*>>& params, double lr);
    void step(const std::vector<std::pair<std::string, Matrix*>>& params,
              const std::vector<std::pair<std::string, Matrix*>>& grads);
};

void soft_update_all(const std::vector<std::pair<std::string, Matrix*>>& target,
                     const std::vector<std::pair<std::string, const Matrix*>>& source, double tau);

Matrix softmax_row(const Matrix& logits);
/// Gradient through softmax: g_i = p_i*(u_i - sum_j p_j*u_j).
Matrix softmax_backward(const Matrix& grad_probs, const Matrix& probs);

int argmax_row(const Matrix& row);

} // namespace ksddpg
